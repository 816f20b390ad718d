using System.Linq;

public class countVowelsUtil
{
    public static int countVowels(char[] x) => x.Count(c => "aeiou".IndexOf(c) >= 0);
}
