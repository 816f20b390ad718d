using System.Linq;

public class maxOfUtil
{
    public static int maxOf(int[] x) => x.Max();
}
