using System;

public class xMsIntUtil
{
    public static bool xMsInt(int y, int[] x) => Array.IndexOf(x, y) >= 0;

    public static bool[] xMsInt(int[] y, int x) => Array.ConvertAll(y, v => v == x);

    public static bool[] xMsInt(int[] y, int[] x) => Array.ConvertAll(y, v => Array.IndexOf(x, v) >= 0);

    public static bool[,] xMsInt(int[,] y, int x) => Map(y, v => v == x);

    public static bool[,] xMsInt(int[,] y, int[] x) => Map(y, v => Array.IndexOf(x, v) >= 0);

    public static bool xMsInt(int y, int[,] x)
    {
        foreach (int v in x)
            if (v == y) return true;
        return false;
    }

    public static bool[] xMsInt(int[] y, int[,] x) => Array.ConvertAll(y, v => xMsInt(v, x));

    public static bool[,] xMsInt(int[,] y, int[,] x) => Map(y, v => xMsInt(v, x));

    private static bool[,] Map(int[,] y, Func<int, bool> f)
    {
        var r = new bool[y.GetLength(0), y.GetLength(1)];
        for (int i = 0; i < y.GetLength(0); i++)
            for (int j = 0; j < y.GetLength(1); j++)
                r[i, j] = f(y[i, j]);
        return r;
    }
}
