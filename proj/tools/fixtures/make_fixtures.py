"""Regenerates the word-list, stopword and Porter fixtures under data/ and tests/fixtures/.

Requires: wordfreq, nltk, scikit-learn.
"""
import pathlib
import re

import wordfreq
from nltk.stem.porter import PorterStemmer
from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

ROOT = pathlib.Path(__file__).resolve().parents[2]

words = [w for w in wordfreq.top_n_list("en", 3000) if re.fullmatch("[a-z]{2,}", w)][:1000]
(ROOT / "data" / "common_words_1000.txt").write_text("\n".join(words) + "\n")
(ROOT / "data" / "stopwords.txt").write_text("\n".join(sorted(ENGLISH_STOP_WORDS)) + "\n")

extra = """protective protection runs running ran cat cats rowers rowing row guide guides guided
jump jumped jumping eight settle settled settlement search searching major string strings cost
costs village villages caresses ponies ties caress agreed plastered motoring sing conflated troubled
sized hopping tanned falling hissing fizzed failing filing happy sky relational conditional rational
valenci hesitanci digitizer conformabli radicalli differentli vileli analogousli vietnamization
predication operator feudalism decisiveness hopefulness callousness formaliti sensitiviti sensibiliti
triplicate formative formalize electriciti electrical hopeful goodness revival allowance inference
airliner gyroscopic adjustable defensible irritant replacement adjustment dependent adoption homologou
communism activate angulariti homologous effective bowdlerize probate rate cease controll roll
generalization generalizations oscillators archaeology apology""".split()

stemmer = PorterStemmer(mode=PorterStemmer.MARTIN_EXTENSIONS)
seen = set()
rows = []
for w in words + extra:
    if w in seen:
        continue
    seen.add(w)
    rows.append(f"{w}\t{stemmer.stem(w)}")
(ROOT / "tests" / "fixtures" / "porter_pairs.tsv").write_text("\n".join(rows) + "\n")
