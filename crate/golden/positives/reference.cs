using System.Linq;

public class positivesUtil
{
    public static int[] positives(int[] x) => x.Where(v => v > 0).ToArray();
}
