using System;
using System.Collections;
using System.Collections.Generic;
using System.Globalization;
using System.Linq;
using System.Reflection;
using System.Text;

{CANDIDATE_CODE}

internal static class AplBridgeHarness
{
    public static void Main()
    {
        CultureInfo.CurrentCulture = CultureInfo.InvariantCulture;
{TEST_INVOCATIONS}
    }

    private static void Run(int index, string className, string methodName, Func<object[]> args)
    {
        string line;
        try
        {
            object result = Invoke(className, methodName, args());
            line = "TEST" + index + ":" + CanonicalJson.Serialize(result);
        }
        catch (Exception ex)
        {
            while (ex is TargetInvocationException && ex.InnerException != null)
            {
                ex = ex.InnerException;
            }
            string message = (ex.Message ?? "").Replace("\r", " ").Replace("\n", " ");
            line = "TEST" + index + ":ERROR:" + ex.GetType().Name + ":" + message;
        }
        Console.WriteLine(line);
        Console.Out.Flush();
    }

    private static object Invoke(string className, string methodName, object[] args)
    {
        const BindingFlags flags = BindingFlags.Public | BindingFlags.NonPublic | BindingFlags.Static | BindingFlags.Instance | BindingFlags.DeclaredOnly;
        Type[] types = Assembly.GetExecutingAssembly().GetTypes();
        IEnumerable<Type> ordered = types.Where(t => t.Name == className).Concat(types.Where(t => t.Name != className && t != typeof(AplBridgeHarness)));
        foreach (Type type in ordered)
        {
            var candidates = type.GetMethods(flags)
                .Where(m => m.Name == methodName && m.GetParameters().Length == args.Length && !m.IsGenericMethodDefinition)
                .Select(m => new { Method = m, Score = Score(m.GetParameters(), args) })
                .Where(c => c.Score >= 0)
                .OrderByDescending(c => c.Score)
                .ToList();
            foreach (var c in candidates)
            {
                object[] coerced;
                try
                {
                    coerced = c.Method.GetParameters().Select((p, i) => Coerce(args[i], p.ParameterType)).ToArray();
                }
                catch (Exception ex) when (ex is InvalidCastException || ex is FormatException || ex is OverflowException)
                {
                    continue;
                }
                object target = c.Method.IsStatic ? null : Activator.CreateInstance(type);
                return c.Method.Invoke(target, coerced);
            }
        }
        throw new MissingMethodException(className, methodName);
    }

    // Higher is a better overload match; negative means ranks differ.
    private static int Score(ParameterInfo[] parameters, object[] args)
    {
        int score = 0;
        for (int i = 0; i < args.Length; i++)
        {
            Type t = parameters[i].ParameterType;
            object a = args[i];
            if (a == null)
            {
                continue;
            }
            if (t.IsInstanceOfType(a))
            {
                score += 4;
                continue;
            }
            int argRank = a is Array arr ? arr.Rank : (a is string ? 1 : 0);
            int paramRank = t.IsArray ? t.GetArrayRank() : (t == typeof(string) ? 1 : 0);
            if (t == typeof(object))
            {
                continue;
            }
            if (argRank != paramRank)
            {
                return -1;
            }
            Type elem = t.IsArray ? t.GetElementType() : t;
            object sample = a is Array sa ? FirstElement(sa) : a;
            if (sample == null || elem.IsInstanceOfType(sample))
            {
                score += 2;
            }
            else if (IsNumeric(sample) && IsNumericType(elem))
            {
                score += 1;
            }
        }
        return score;
    }

    private static object FirstElement(Array a)
    {
        foreach (object o in a)
        {
            return o;
        }
        return null;
    }

    private static bool IsNumeric(object o)
    {
        return o is int || o is long || o is short || o is byte || o is double || o is float || o is decimal || o is bool;
    }

    private static bool IsNumericType(Type t)
    {
        return t == typeof(int) || t == typeof(long) || t == typeof(short) || t == typeof(byte) || t == typeof(double) || t == typeof(float) || t == typeof(decimal) || t == typeof(bool);
    }

    private static object Coerce(object value, Type target)
    {
        if (value == null || target == typeof(object) || target.IsInstanceOfType(value))
        {
            return value;
        }
        if (target.IsArray && value is Array source)
        {
            Type elem = target.GetElementType();
            if (source.Rank != target.GetArrayRank())
            {
                throw new InvalidCastException("rank mismatch");
            }
            int[] lengths = Enumerable.Range(0, source.Rank).Select(source.GetLength).ToArray();
            Array result = Array.CreateInstance(elem, lengths);
            if (source.Rank == 1)
            {
                for (int i = 0; i < lengths[0]; i++)
                {
                    result.SetValue(Coerce(source.GetValue(i), elem), i);
                }
            }
            else if (source.Rank == 2)
            {
                for (int i = 0; i < lengths[0]; i++)
                {
                    for (int j = 0; j < lengths[1]; j++)
                    {
                        result.SetValue(Coerce(source.GetValue(i, j), elem), i, j);
                    }
                }
            }
            else
            {
                throw new InvalidCastException("rank above 2");
            }
            return result;
        }
        if (target == typeof(string) && value is char[] chars)
        {
            return new string(chars);
        }
        if (target == typeof(string) && value is object[] objs && objs.All(o => o is char))
        {
            return new string(objs.Cast<char>().ToArray());
        }
        if (target == typeof(char) && value is string s && s.Length == 1)
        {
            return s[0];
        }
        if (target == typeof(bool) && IsNumeric(value))
        {
            double d = Convert.ToDouble(value, CultureInfo.InvariantCulture);
            if (d == 0) return false;
            if (d == 1) return true;
            throw new InvalidCastException("not a boolean");
        }
        if ((target == typeof(int) || target == typeof(long)) && (value is double || value is float || value is decimal))
        {
            double d = Convert.ToDouble(value, CultureInfo.InvariantCulture);
            if (Math.Floor(d) != d)
            {
                throw new InvalidCastException("not integral");
            }
        }
        return Convert.ChangeType(value, target, CultureInfo.InvariantCulture);
    }
}

internal static class CanonicalJson
{
    public static string Serialize(object value)
    {
        var sb = new StringBuilder();
        Write(sb, value);
        return sb.ToString();
    }

    private static void Write(StringBuilder sb, object value)
    {
        switch (value)
        {
            case null:
                sb.Append("null");
                return;
            case bool b:
                sb.Append(b ? "true" : "false");
                return;
            case string s:
                WriteString(sb, s);
                return;
            case char c:
                WriteString(sb, c.ToString());
                return;
            case double d:
                WriteReal(sb, d);
                return;
            case float f:
                WriteReal(sb, f);
                return;
            case decimal m:
                sb.Append(m.ToString(CultureInfo.InvariantCulture));
                return;
            case int _:
            case long _:
            case short _:
            case byte _:
            case uint _:
            case ulong _:
            case ushort _:
            case sbyte _:
                sb.Append(Convert.ToString(value, CultureInfo.InvariantCulture));
                return;
            case Array a when a.Rank == 2:
                sb.Append('[');
                for (int i = 0; i < a.GetLength(0); i++)
                {
                    if (i > 0) sb.Append(',');
                    sb.Append('[');
                    for (int j = 0; j < a.GetLength(1); j++)
                    {
                        if (j > 0) sb.Append(',');
                        Write(sb, a.GetValue(i, j));
                    }
                    sb.Append(']');
                }
                sb.Append(']');
                return;
            case Array a when a.Rank > 2:
                throw new NotSupportedException("arrays above rank 2");
            case IEnumerable e:
                sb.Append('[');
                bool first = true;
                foreach (object item in e)
                {
                    if (!first) sb.Append(',');
                    first = false;
                    Write(sb, item);
                }
                sb.Append(']');
                return;
            default:
                throw new NotSupportedException("cannot serialize " + value.GetType().Name);
        }
    }

    private static void WriteReal(StringBuilder sb, double d)
    {
        if (double.IsNaN(d) || double.IsInfinity(d))
        {
            throw new NotSupportedException("non-finite number");
        }
        sb.Append(d.ToString("R", CultureInfo.InvariantCulture));
    }

    private static void WriteString(StringBuilder sb, string s)
    {
        sb.Append('"');
        foreach (char c in s)
        {
            switch (c)
            {
                case '"': sb.Append("\\\""); break;
                case '\\': sb.Append("\\\\"); break;
                case '\n': sb.Append("\\n"); break;
                case '\r': sb.Append("\\r"); break;
                case '\t': sb.Append("\\t"); break;
                default:
                    if (c < 0x20)
                    {
                        sb.Append("\\u").Append(((int)c).ToString("x4"));
                    }
                    else
                    {
                        sb.Append(c);
                    }
                    break;
            }
        }
        sb.Append('"');
    }
}
