using System.Collections.Generic;

public class xIsectrUtil
{
    // Rows of x that also occur as rows of y, in x order.
    public static int[,] xIsectr(int[,] y, int[,] x)
    {
        int cols = x.GetLength(1);
        var keep = new List<int>();
        for (int i = 0; i < x.GetLength(0); i++)
        {
            bool hit = false;
            for (int j = 0; j < y.GetLength(0) && !hit; j++)
            {
                if (y.GetLength(1) != cols) break;
                bool same = true;
                for (int k = 0; k < cols; k++)
                {
                    if (x[i, k] != y[j, k]) { same = false; break; }
                }
                hit = same;
            }
            if (hit) keep.Add(i);
        }
        var r = new int[keep.Count, cols];
        for (int i = 0; i < keep.Count; i++)
            for (int k = 0; k < cols; k++)
                r[i, k] = x[keep[i], k];
        return r;
    }
}
