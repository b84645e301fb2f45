# Independent oracle for the default lexical embedding provider:
# character trigram counts over " " + lowercase(text) + " ", L2-normalised,
# cosine distance, average-linkage agglomeration with cutoff 0.5.
import itertools, math
from collections import Counter

def grams(t, n=3):
    s = " " + t.lower() + " "
    return Counter(s[i:i+n] for i in range(len(s) - n + 1))

def cos_dist(a, b):
    dot = sum(a[k] * b.get(k, 0) for k in a)
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    return 1 - dot / (na * nb)

texts = ["stock market rally", "market stocks rallying", "rainfall in Tokyo"]
g = [grams(t) for t in texts]
for i, j in itertools.combinations(range(3), 2):
    print(i, j, repr(cos_dist(g[i], g[j])))
