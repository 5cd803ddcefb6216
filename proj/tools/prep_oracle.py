#!/usr/bin/env python3
"""Reference tweet normalizer written directly from the rule list.

Used only to generate golden files; the C++ normalizer is checked against its
output. Usage:
  prep_oracle.py LEXICON INPUTS.txt GOLDEN.tsv      one input per line
  prep_oracle.py LEXICON --csv IN.csv TEXT_COL OUT.csv
"""
import csv
import math
import re
import sys

PLACEHOLDERS = {"user": "<user>", "number": "<number>", "hashtag": "<hashtag>",
                "url": "<url>", "emoticon": "<emoticon>"}
THRESHOLD = 3

EMOTICONS = [
    ":)", ":-)", ":))", ":)))", "(:", "=)", ":]", ":}", ":o)", ":(", ":-(", ":((",
    "):", "=(", ":[", ":{", ":'(", ":'-(", ";)", ";-)", ";D", ";p", ";P", ":D",
    ":-D", "=D", "xD", "XD", ":P", ":-P", ":p", ":-p", "=P", ":b", ":O",
    ":-O", ":o", ":-o", ":0", ":/", ":-/", ":\\", ":|", ":-|", ":*", ":-*", ":$",
    ":@", ">:(", ">:)", "D:", "<3", "</3", "^_^", "^^", "-_-", "o_O", "O_o", "T_T",
    ":3", "8-)", ":S", ":s", "\\o/", ":')",
]

WS = " \t\n\r\f\v"
WS_SPLIT = re.compile(r"([ \t\n\r\f\v]+)")
URL = re.compile(r"(?<![A-Za-z0-9_])(?:http://|https://|www\.)[^ \t\n\r\f\v]*", re.I | re.A)
MENTION = re.compile(r"(?<![A-Za-z0-9_])@[A-Za-z0-9_]+", re.A)
HASHTAG = re.compile(r"(?<![A-Za-z0-9_])#[A-Za-z0-9_]+", re.A)
NUMBER = re.compile(r"[0-9]+(?:[.,:][0-9]+)*", re.A)
ELONGATED = re.compile(r"([^ \t\n\r\f\v])\1{%d,}" % (THRESHOLD - 1), re.I | re.A)
APOSTROPHES = "'`\u2018\u2019"


def load_lexicon(path):
    counts = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            word, count = line.split("\t", 1)
            counts[word.lower()] = counts.get(word.lower(), 0.0) + float(count)
    counts = {w: c for w, c in counts.items() if w and c > 0}
    total = 0.0
    for w in sorted(counts, key=lambda s: s.encode()):
        total += counts[w]
    return {w: math.log(c / total) for w, c in counts.items()}


def camel_split(body):
    parts, cur = [], ""
    for i, c in enumerate(body):
        if c == "_":
            if cur:
                parts.append(cur)
            cur = ""
            continue
        if cur:
            p = cur[-1]
            cut = (p.isdigit() != c.isdigit()
                   or (p.islower() and c.isupper())
                   or (p.isupper() and c.isupper() and i + 1 < len(body) and body[i + 1].islower()))
            if cut:
                parts.append(cur)
                cur = ""
        cur += c
    if cur:
        parts.append(cur)
    return parts


def best_split(s, logp, longest):
    n = len(s)
    score = [None] * (n + 1)
    back = [0] * (n + 1)
    score[0] = 0.0
    for end in range(1, n + 1):
        for start in range(max(0, end - longest), end):
            if score[start] is None or s[start:end] not in logp:
                continue
            v = score[start] + logp[s[start:end]]
            if score[end] is None or v > score[end]:
                score[end], back[end] = v, start
    if score[n] is None:
        return None
    words, end = [], n
    while end > 0:
        words.append(s[back[end]:end])
        end = back[end]
    return words[::-1]


def segment(tag, logp, longest):
    words = []
    for frag in camel_split(tag[1:]):
        if frag.isdigit():
            words.append(frag)
            continue
        seg = best_split(frag.lower(), logp, longest)
        if seg is None:
            return None
        words.extend(seg)
    return " ".join(words) if words else None


# A segment list holds str (editable text) or ("ph", text) tuples (protected).
def over_text(segs, fn):
    out = []
    for s in segs:
        out.extend([s] if isinstance(s, tuple) else fn(s))
    return [s for s in out if s != ""]


def regex_rule(pattern, replace):
    def fn(text):
        out, last = [], 0
        for m in pattern.finditer(text):
            out.append(text[last:m.start()])
            out.append(replace(m.group(0)))
            last = m.end()
        out.append(text[last:])
        return out
    return fn


def emoticon_rule(text):
    out = []
    for tok in WS_SPLIT.split(text):
        if tok in EMOTICONS:
            out.append(("ph", PLACEHOLDERS["emoticon"]))
            continue
        best = 0
        for e in EMOTICONS:
            if len(e) >= 2 and len(e) < len(tok) and not e[0].isalnum() and tok.endswith(e) \
                    and tok[-len(e) - 1].isascii() and tok[-len(e) - 1].isalnum():
                best = max(best, len(e))
        if best:
            out.extend([tok[:-best], ("ph", PLACEHOLDERS["emoticon"])])
        else:
            out.append(tok)
    return out


def collapse(text):
    return ELONGATED.sub(lambda m: m.group(1), text)


def strip(text):
    kept, joined = [], False
    for c in text:
        if (c.isascii() and c.isalpha()) or c in WS:
            kept.append(c)
        elif c in APOSTROPHES:
            joined = True
        else:
            kept.append(" ")
    out = "".join(kept)
    return collapse(out) if joined else out


def normalize(raw, logp, longest):
    segs = []
    for tok in WS_SPLIT.split(raw):
        segs.append(("ph", tok) if tok in PLACEHOLDERS.values() else tok)
    segs = over_text(segs, regex_rule(URL, lambda m: ("ph", PLACEHOLDERS["url"])))
    segs = over_text(segs, regex_rule(MENTION, lambda m: ("ph", PLACEHOLDERS["user"])))
    segs = over_text(segs, emoticon_rule)

    def hashtag(m):
        words = segment(m, logp, longest)
        return ("ph", PLACEHOLDERS["hashtag"]) if words is None else " " + words + " "
    segs = over_text(segs, regex_rule(HASHTAG, hashtag))
    segs = over_text(segs, regex_rule(NUMBER, lambda m: ("ph", PLACEHOLDERS["number"])))
    segs = over_text(segs, lambda t: [collapse(t)])
    segs = over_text(segs, lambda t: [strip(t)])
    flat = "".join(" " + s[1] + " " if isinstance(s, tuple) else s for s in segs)
    return " ".join(flat.split()).lower()


def main():
    logp = load_lexicon(sys.argv[1])
    longest = max(len(w) for w in logp)
    if sys.argv[2] == "--csv":
        src, col, dst = sys.argv[3], sys.argv[4], sys.argv[5]
        with open(src, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        idx = rows[0].index(col)
        for r in rows[1:]:
            r[idx] = normalize(r[idx], logp, longest)
        with open(dst, "w", newline="", encoding="utf-8") as f:
            csv.writer(f, lineterminator="\n", quoting=csv.QUOTE_MINIMAL).writerows(rows)
        return
    with open(sys.argv[2], encoding="utf-8") as f:
        inputs = [line.rstrip("\n") for line in f]
    with open(sys.argv[3], "w", encoding="utf-8") as f:
        for line in inputs:
            f.write(line + "\t" + normalize(line, logp, longest) + "\n")


if __name__ == "__main__":
    main()
