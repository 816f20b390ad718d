using System;

public class posOfUtil
{
    // 1-based position of each x in y; one past the end when absent.
    public static int[] posOf(int[] y, int[] x) => Array.ConvertAll(x, v =>
    {
        int p = Array.IndexOf(y, v);
        return p < 0 ? y.Length + 1 : p + 1;
    });
}
