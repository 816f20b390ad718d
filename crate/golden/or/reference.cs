public class orUtil
{
    public static bool or(bool[] v)
    {
        bool r = false;
        foreach (bool e in v)
        {
            r = r || e;
            if (r) break;
        }
        return r;
    }
}
