public class shapeOfUtil
{
    public static int[] shapeOf(int[,] x) => new[] { x.GetLength(0), x.GetLength(1) };
}
