public class prodUtil
{
    public static int prod(int[] x)
    {
        int r = 1;
        foreach (int v in x) r *= v;
        return r;
    }
}
