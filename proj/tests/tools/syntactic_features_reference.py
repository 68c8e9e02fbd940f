#!/usr/bin/env python3
"""Reference implementation of the syntactic feature contract.

Implements the documented tokenization rules from scratch (no shared code
with the C++ library) and prints the seven feature values for a text file.
Used once to freeze the golden vector in test_features.cpp; kept so the
golden can be regenerated and audited.

Usage: syntactic_features_reference.py <text-file>
"""

import sys

PUNCT = set('.,;:!?"\'()[]{}<>-*#`') | {'—'}  # includes the em dash
BULLET = '•'

STOPWORDS = set("""
a about above after again against all am an and any are as at be because
been before being below between both but by can could did do does doing
down during each few for from further had has have having he her here hers
herself him himself his how i if in into is it its itself just me more most
my myself no nor not now of off on once only or other our ours ourselves out
over own same shall she should so some such than that the their theirs them
themselves then there these they this those through to too under until up
very was we were what when where which while who whom why will with would
you your yours yourself yourselves
""".split())

ADJ_SOURCE = 'adjective_lexicon'  # read from the C++ header to stay in sync


def adjective_lexicon(header_path):
    words, capture = [], False
    for line in open(header_path, encoding='utf-8'):
        if 'adjective_lexicon()' in line:
            capture = True
            continue
        if capture:
            if 'return words;' in line:
                break
            for piece in line.split('"')[1::2]:
                words.append(piece)
    return set(words)


def strip_token(tok):
    start, end = 0, len(tok)
    while start < end and tok[start] in PUNCT:
        start += 1
    while end > start and tok[end - 1] in PUNCT:
        end -= 1
    return tok[start:end]


def is_list_item(line):
    s = line.lstrip(' \t')
    if not s:
        return False
    if s[0] in '-*' or s[0] == BULLET:
        return True
    i = 0
    while i < len(s) and s[i].isdigit():
        i += 1
    return i > 0 and i < len(s) and s[i] in '.)'


def features(text, adjectives):
    tokens = text.split()
    words = [w for w in (strip_token(t) for t in tokens) if w]
    folded = [w.lower() for w in words]
    token_count = len(tokens)
    unique_words = len(set(folded))
    avg_len = (sum(len(w.encode('utf-8')) for w in words) / len(words)
               if words else 0.0)
    stop = sum(1 for w in folded if w in STOPWORDS)
    punct = sum(1 for ch in text if ch in PUNCT)
    items = sum(1 for line in text.split('\n') if is_list_item(line))
    adj = sum(1 for w in folded
              if (len(w) > 2 and w.endswith('ly')) or w in adjectives)
    return [token_count, unique_words, avg_len, stop, punct, items, adj]


def main():
    if len(sys.argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    here = sys.path[0]
    adjectives = adjective_lexicon(
        here + '/../../include/prefsim/text_features.hpp')
    assert len(STOPWORDS) == 127, len(STOPWORDS)
    assert len(adjectives) == 500, len(adjectives)
    text = open(sys.argv[1], encoding='utf-8').read()
    vals = features(text, adjectives)
    print(','.join(repr(float(v)) for v in vals))
    return 0


if __name__ == '__main__':
    sys.exit(main())
