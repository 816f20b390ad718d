using System.Linq;

public class meanUtil
{
    public static double mean(double[] x) => x.Sum() / x.Length;
}
