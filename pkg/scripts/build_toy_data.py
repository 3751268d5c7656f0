#!/usr/bin/env python3
"""Regenerate the toy knowledge base and datasets shipped in src/tsparser/data.

Weak-supervision denotations are computed by executing the intended logical
forms against the generated KB, so the files are always mutually consistent.
"""
import argparse
import json
from pathlib import Path

from tsparser.semantics import (EntityRef, KnowledgeBase, Number, Triple, dump_kb, execute,
                                format_value, parse_funql, print_funql)

STATES = {  # name: (population, area, capital, other cities)
    "Ohio": (11536504, 44825, "Columbus", ["Cleveland", "Cincinnati"]),
    "Texas": (25145561, 268596, "Austin", ["Houston", "Dallas", "San_Antonio"]),
    "California": (37253956, 163695, "Sacramento", ["Los_Angeles", "San_Diego", "San_Francisco"]),
    "Oregon": (3831074, 98379, "Salem", ["Portland"]),
    "Nevada": (2700551, 110572, "Carson_City", ["Las_Vegas", "Reno"]),
    "Arizona": (6392017, 113990, "Phoenix", ["Tucson"]),
    "Utah": (2763885, 84897, "Salt_Lake_City", []),
    "Kentucky": (4339367, 40408, "Frankfort", ["Louisville"]),
    "Indiana": (6483802, 36420, "Indianapolis", []),
    "Pennsylvania": (12702379, 46054, "Harrisburg", ["Philadelphia", "Pittsburgh"]),
    "Idaho": (1567582, 83569, "Boise", []),
    "Washington": (6724540, 71298, "Olympia", ["Seattle"]),
    "New_Mexico": (2059179, 121590, "Santa_Fe", ["Albuquerque"]),
}
CITY_POP = {
    "Columbus": 787033, "Cleveland": 396815, "Cincinnati": 296943, "Austin": 790390,
    "Houston": 2099451, "Dallas": 1197816, "San_Antonio": 1327407, "Sacramento": 466488,
    "Los_Angeles": 3792621, "San_Diego": 1307402, "San_Francisco": 805235, "Salem": 154637,
    "Portland": 583776, "Carson_City": 55274, "Las_Vegas": 583756, "Reno": 225221,
    "Phoenix": 1445632, "Tucson": 520116, "Salt_Lake_City": 186440, "Frankfort": 25527,
    "Louisville": 597337, "Indianapolis": 820445, "Harrisburg": 49528, "Philadelphia": 1526006,
    "Pittsburgh": 305704, "Boise": 205671, "Olympia": 46478, "Seattle": 608660,
    "Santa_Fe": 67947, "Albuquerque": 545852,
}
BORDERS = [
    ("Ohio", "Indiana"), ("Ohio", "Kentucky"), ("Ohio", "Pennsylvania"), ("Indiana", "Kentucky"),
    ("Oregon", "California"), ("Oregon", "Nevada"), ("Oregon", "Idaho"), ("Oregon", "Washington"),
    ("California", "Nevada"), ("California", "Arizona"), ("Nevada", "Arizona"), ("Nevada", "Utah"),
    ("Nevada", "Idaho"), ("Arizona", "Utah"), ("Arizona", "New_Mexico"), ("Utah", "Idaho"),
    ("Idaho", "Washington"), ("Texas", "New_Mexico"),
]
RIVERS = {  # name: (length km, states)
    "Ohio_River": (1579, ["Ohio", "Kentucky", "Indiana", "Pennsylvania"]),
    "Colorado_River": (2330, ["Arizona", "Nevada", "California", "Utah"]),
    "Rio_Grande": (3051, ["Texas", "New_Mexico"]),
    "Columbia_River": (2000, ["Oregon", "Washington"]),
    "Snake_River": (1735, ["Idaho", "Oregon", "Washington"]),
    "Red_River": (2190, ["Texas"]),
    "Wabash_River": (810, ["Indiana", "Ohio"]),
}


def build_kb() -> KnowledgeBase:
    t = []

    def add(s, r, o):
        t.append(Triple(s, r, Number(o) if isinstance(o, (int, float)) else EntityRef(o)))

    for state, (pop, area, cap, others) in STATES.items():
        add(state, "population", pop)
        add(state, "area", area)
        add(state, "capital", cap)
        for c in [cap] + others:
            add(state, "city", c)
            add(c, "loc", state)
    for c, pop in CITY_POP.items():
        add(c, "population", pop)
    for a, b in BORDERS:
        add(a, "borders", b)
        add(b, "borders", a)
    for river, (length, states) in RIVERS.items():
        add(river, "length", length)
        for s in states:
            add(s, "river", river)
            add(river, "traverse", s)
    add("Barack_Obama", "daughterOf", "Malia_Obama")
    add("Barack_Obama", "daughterOf", "Sasha_Obama")
    add("Barack_Obama", "spouse", "Michelle_Obama")
    add("Michelle_Obama", "spouse", "Barack_Obama")
    add("2014", "InfluentialTeensByYear", "Malia_Obama")
    for person, age in (("Barack_Obama", 53), ("Michelle_Obama", 50), ("Malia_Obama", 16),
                        ("Sasha_Obama", 13)):
        add(person, "age", age)
    for f in ("Jen-Hsun_Huang", "Chris_Malachowsky", "Curtis_Priem"):
        add("NVIDIA", "business.company.founders", f)
        add(f, "people.person.employer", "NVIDIA")
    add("Jen-Hsun_Huang", "people.person.place_of_birth", "Tainan")
    return KnowledgeBase.build(t)


def linker_rows(kb):
    rows = []
    for e in sorted(kb.entities):
        rows.append((e.replace("_", " ").replace("-", " ").lower(), e))
    extra = [
        ("ohio", "Ohio_River"), ("colorado", "Colorado_River"), ("columbia", "Columbia_River"),
        ("snake", "Snake_River"), ("red", "Red_River"), ("wabash", "Wabash_River"),
        ("obama", "Barack_Obama"), ("barack", "Barack_Obama"), ("michelle", "Michelle_Obama"),
        ("malia", "Malia_Obama"), ("sasha", "Sasha_Obama"), ("huang", "Jen-Hsun_Huang"),
        ("malachowsky", "Chris_Malachowsky"), ("priem", "Curtis_Priem"),
        ("vegas", "Las_Vegas"), ("philly", "Philadelphia"),
    ]
    rows.extend(extra)
    return rows


SUPERVISED = [
    ("how many daughters does obama have", "count(daughterOf(Barack_Obama))"),
    ("what is the capital of ohio", "capital(Ohio)"),
    ("what is the capital of texas", "capital(Texas)"),
    ("what is the capital of oregon", "capital(Oregon)"),
    ("name the capital of utah", "capital(Utah)"),
    ("how many cities are in texas", "count(city(Texas))"),
    ("how many cities are in california", "count(city(California))"),
    ("how many states border nevada", "count(borders(Nevada))"),
    ("how many rivers run through oregon", "count(river(Oregon))"),
    ("which states border oregon", "borders(Oregon)"),
    ("which states border kentucky", "borders(Kentucky)"),
    ("what states are next to arizona", "borders(Arizona)"),
    ("which rivers run through ohio", "river(Ohio)"),
    ("what rivers flow through texas", "river(Texas)"),
    ("which cities are in pennsylvania", "city(Pennsylvania)"),
    ("list the cities of washington", "city(Washington)"),
    ("what is the population of ohio", "population(Ohio)"),
    ("how many people live in seattle", "population(Seattle)"),
    ("what is the area of idaho", "area(Idaho)"),
    ("how long is the rio grande", "length(Rio_Grande)"),
    ("which state is boise in", "loc(Boise)"),
    ("what state is reno in", "loc(Reno)"),
    ("which states does the colorado river run through", "traverse(Colorado_River)"),
    ("what is the largest city in california", "argmax(city(California), population)"),
    ("what is the largest city in texas", "argmax(city(Texas), population)"),
    ("what is the smallest city in ohio", "argmin(city(Ohio), population)"),
    ("what is the longest river in oregon", "argmax(river(Oregon), length)"),
    ("what is the shortest river in indiana", "argmin(river(Indiana), length)"),
    ("what is the biggest state bordering utah", "argmax(borders(Utah), area)"),
    ("what is the smallest state bordering nevada", "argmin(borders(Nevada), area)"),
    ("which state bordering idaho has the most people", "argmax(borders(Idaho), population)"),
    ("cities in texas with more than 1500000 people", "filter_gt(city(Texas), population, 1500000)"),
    ("cities in california with fewer than 1000000 people", "filter_lt(city(California), population, 1000000)"),
    ("states bordering oregon with area above 100000", "filter_gt(borders(Oregon), area, 100000)"),
    ("rivers in texas longer than 2500", "filter_gt(river(Texas), length, 2500)"),
    ("which states border ohio and indiana", "and(borders(Ohio), borders(Indiana))"),
    ("which states border nevada and utah", "and(borders(Nevada), borders(Utah))"),
    ("what states border texas or ohio", "or(borders(Texas), borders(Ohio))"),
    ("what are the cities of utah or idaho", "or(city(Utah), city(Idaho))"),
    ("what are the capitals of states bordering ohio", "capital(borders(Ohio))"),
    ("what are the capitals of states bordering texas", "capital(borders(Texas))"),
    ("what rivers run through states bordering idaho", "river(borders(Idaho))"),
    ("what is the population of the capital of arizona", "population(capital(Arizona))"),
    ("how many cities are in states bordering kentucky", "count(city(borders(Kentucky)))"),
    ("who is the spouse of barack obama", "spouse(Barack_Obama)"),
    ("how old is malia", "age(Malia_Obama)"),
    ("who was an influential teen in 2014", "InfluentialTeensByYear(2014)"),
    ("who is the oldest daughter of obama", "argmax(daughterOf(Barack_Obama), age)"),
    ("who founded nvidia", "business.company.founders(NVIDIA)"),
    ("where was jen hsun huang born", "people.person.place_of_birth(Jen-Hsun_Huang)"),
]

WEAK = [
    ("how many daughters does obama have", "count(daughterOf(Barack_Obama))"),
    ("what is the capital of texas", "capital(Texas)"),
    ("what is the capital of ohio", "capital(Ohio)"),
    ("which states border oregon", "borders(Oregon)"),
    ("what rivers flow through texas", "river(Texas)"),
    ("what is the largest city in california", "argmax(city(California), population)"),
    ("how many cities are in ohio", "count(city(Ohio))"),
    ("who founded nvidia", "business.company.founders(NVIDIA)"),
    ("what is the population of utah", "population(Utah)"),
    ("which states does the colorado river run through", "traverse(Colorado_River)"),
    ("what is the longest river in oregon", "argmax(river(Oregon), length)"),
    ("who is the spouse of barack obama", "spouse(Barack_Obama)"),
    ("what is the capital of arizona", "capital(Arizona)"),
    ("how many states border nevada", "count(borders(Nevada))"),
    ("which cities are in kentucky", "city(Kentucky)"),
    ("what state is seattle in", "loc(Seattle)"),
    ("who was an influential teen in 2014", "InfluentialTeensByYear(2014)"),
    ("what is the smallest state bordering nevada", "argmin(borders(Nevada), area)"),
    ("what is the capital of pennsylvania", "capital(Pennsylvania)"),
    ("what is the area of idaho", "area(Idaho)"),
]

WEAK_DEV = [
    ("what is the capital of utah", "capital(Utah)"),
    ("what is the capital of indiana", "capital(Indiana)"),
    ("what is the capital of nevada", "capital(Nevada)"),
    ("which cities are in texas", "city(Texas)"),
    ("which states border idaho", "borders(Idaho)"),
    ("what rivers flow through washington", "river(Washington)"),
    ("what is the largest city in texas", "argmax(city(Texas), population)"),
    ("what is the population of oregon", "population(Oregon)"),
    ("how many cities are in california", "count(city(California))"),
    ("what state is phoenix in", "loc(Phoenix)"),
    ("what is the longest river in texas", "argmax(river(Texas), length)"),
    ("how many states border arizona", "count(borders(Arizona))"),
]

DISTANT = [
    ("NVIDIA was founded by Jen-Hsun_Huang and Chris_Malachowsky", ["NVIDIA", "Jen-Hsun_Huang", "Chris_Malachowsky"]),
    ("Columbus is the capital of Ohio", ["Columbus", "Ohio"]),
    ("Austin is the capital of Texas", ["Austin", "Texas"]),
    ("The Ohio_River flows through Kentucky", ["Ohio_River", "Kentucky"]),
    ("Malia_Obama is a daughter of Barack_Obama", ["Malia_Obama", "Barack_Obama"]),
    ("Sasha_Obama is a daughter of Barack_Obama", ["Sasha_Obama", "Barack_Obama"]),
    ("Portland is a city in Oregon", ["Portland", "Oregon"]),
    ("Phoenix is the capital of Arizona", ["Phoenix", "Arizona"]),
    ("Curtis_Priem works for NVIDIA", ["Curtis_Priem", "NVIDIA"]),
    ("Seattle is a city in Washington", ["Seattle", "Washington"]),
    ("Las_Vegas is located in Nevada", ["Las_Vegas", "Nevada"]),
    ("Boise grew quickly", ["Boise"]),
]

STOPWORDS = """a an the of in on at to for from by with and or is are was were be been do does did
have has had what which who whom whose where when how many much there their its it this that these
those name list give me tell i you we they he she his her as into through than more most""".split()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/tsparser/data"))
    out = Path(ap.parse_args().out)
    out.mkdir(parents=True, exist_ok=True)
    kb = build_kb()
    (out / "toy_kb.tsv").write_text(
        "# Toy knowledge base: US geography, the Obama family and NVIDIA founders.\n" + dump_kb(kb),
        encoding="utf-8")
    (out / "toy_linker.tsv").write_text(
        "".join(f"{p}\t{e}\n" for p, e in linker_rows(kb)), encoding="utf-8")

    def sup(pairs):
        for utt, lf in pairs:
            assert print_funql(parse_funql(lf)) == lf, lf
            execute(parse_funql(lf), kb)
            yield json.dumps({"utterance": utt, "lf": lf})

    def weak(pairs):
        for utt, lf in pairs:
            den = execute(parse_funql(lf), kb)
            assert den, lf
            yield json.dumps({"utterance": utt, "denotation": sorted(format_value(v) for v in den),
                              "exactly_one": False})

    def distant():
        for text, ents in DISTANT:
            toks = text.split()
            yield json.dumps({"tokens": toks, "mentions": [
                {"span": [toks.index(e), toks.index(e) + 1], "entity": e} for e in ents]})

    for name, lines in (("toy_geo.jsonl", sup(SUPERVISED)), ("toy_weak.jsonl", weak(WEAK)),
                        ("toy_weak_dev.jsonl", weak(WEAK_DEV)), ("toy_distant.jsonl", distant())):
        (out / name).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    (out / "stopwords.txt").write_text("\n".join(STOPWORDS) + "\n", encoding="utf-8")
    print(f"wrote toy data to {out}")


if __name__ == "__main__":
    main()
