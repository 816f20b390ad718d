using System;

public class scaleUtil
{
    public static double[] scale(double y, double[] x) => Array.ConvertAll(x, v => y * v);
}
