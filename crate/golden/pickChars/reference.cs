public class pickCharsUtil
{
    // APL positions are 1-based.
    public static char[] pickChars(int[] y, char[] x)
    {
        var r = new char[y.Length];
        for (int i = 0; i < y.Length; i++)
            r[i] = x[y[i] - 1];
        return r;
    }
}
