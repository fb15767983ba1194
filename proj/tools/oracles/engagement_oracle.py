#!/usr/bin/env python3
"""Independent engagement table, same CSV layout as `medsim analyze engagement --format csv`."""
import csv
import math
import statistics
import sys
from collections import defaultdict

METRICS = [
    "students", "total_cases", "cases_per_student_mean", "cases_per_student_sd",
    "n_1_case", "pct_1_case", "n_2plus_cases", "pct_2plus_cases", "n_5plus_cases", "pct_5plus_cases",
    "duration_min_mean", "duration_min_sd", "turns_mean", "turns_sd",
    "n_voice_only", "pct_voice_only", "n_text_only", "pct_text_only",
    "n_both_modalities", "pct_both_modalities", "mirs_overall_mean", "mirs_overall_sd",
    "checklist_pct_mean", "checklist_pct_sd",
]


def num(s):
    return float("nan") if s in ("", "NA", "nan") else float(s)


def mean_sd(xs):
    xs = [x for x in xs if not math.isnan(x)]
    m = statistics.fmean(xs) if xs else float("nan")
    sd = statistics.stdev(xs) if len(xs) > 1 else float("nan")
    return m, sd


def summarize(rows):
    per = defaultdict(lambda: {"n": 0, "mods": set()})
    for r in rows:
        per[r["learner_id"]]["n"] += 1
        per[r["learner_id"]]["mods"].add(r["modality"])
    students = len(per)
    counts = [p["n"] for p in per.values()]

    def cnt(pred):
        k = sum(1 for p in per.values() if pred(p))
        return [k, 100.0 * k / students]

    out = [students, len(rows), *mean_sd([float(c) for c in counts])]
    out += cnt(lambda p: p["n"] == 1) + cnt(lambda p: p["n"] >= 2) + cnt(lambda p: p["n"] >= 5)
    out += [*mean_sd([num(r["duration_minutes"]) for r in rows])]
    out += [*mean_sd([float(r["turn_count"]) for r in rows])]
    out += cnt(lambda p: p["mods"] == {"voice"}) + cnt(lambda p: p["mods"] == {"text"})
    out += cnt(lambda p: p["mods"] == {"voice", "text"})
    out += [*mean_sd([num(r["mirs_overall"]) for r in rows])]
    out += [*mean_sd([num(r["checklist_completion_pct"]) for r in rows])]
    return out


def fmt(v):
    return "NA" if math.isnan(v) else "%.6f" % v


def main(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = [r for r in csv.DictReader(f) if r["excluded"] not in ("true", "1")]
    groups = defaultdict(list)
    for r in rows:
        groups[r["institution_id"]].append(r)
    names = sorted(groups)
    cols = [summarize(groups[g]) for g in names] + [summarize(rows)]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["metric", *names, "overall"])
    for i, m in enumerate(METRICS):
        w.writerow([m, *(fmt(float(c[i])) for c in cols)])


if __name__ == "__main__":
    main(sys.argv[1])
