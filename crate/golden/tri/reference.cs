public class triUtil
{
    public static int tri(int n)
    {
        int r = 0;
        for (int i = 1; i <= n; i++) r += i;
        return r;
    }
}
