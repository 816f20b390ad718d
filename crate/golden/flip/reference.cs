public class flipUtil
{
    public static int[,] flip(int[,] x)
    {
        int rows = x.GetLength(0), cols = x.GetLength(1);
        var r = new int[cols, rows];
        for (int i = 0; i < rows; i++)
            for (int j = 0; j < cols; j++)
                r[j, i] = x[i, j];
        return r;
    }
}
