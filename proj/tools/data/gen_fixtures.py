"""Regenerates the synthetic fixtures under data/fixtures.

Everything is seeded; rerunning produces identical files.
"""
import csv
import datetime as dt
import pathlib
import random
from fractions import Fraction

import numpy as np
import yaml

ROOT = pathlib.Path(__file__).resolve().parents[2]
OUT = ROOT / "data" / "fixtures"

TELEMETRY_COLUMNS = [
    "session_id", "learner_id", "institution_id", "case_id", "case_version", "modality",
    "duration_minutes", "turn_count", "checklist_completion_pct", "mirs_overall",
    "reflection_char_length", "completed_at", "excluded",
]

# Per site: learners, sessions, learners with exactly 1, with 5+, with 8+,
# (voice-only, text-only, both), duration and turn targets, checklist and MIRS targets.
SITES = {
    "inst-a": dict(n=275, total=620, ones=116, five=15, eight=3, modality=(98, 137, 40),
                   duration=(19.8, 9.1), turns=(38.0, 19.9), checklist=(54.8, 16.0), mirs=(3.57, 0.70)),
    "inst-b": dict(n=104, total=362, ones=28, five=26, eight=9, modality=(56, 30, 18),
                   duration=(16.9, 7.0), turns=(39.4, 14.6), checklist=(59.3, 21.5), mirs=(3.69, 0.60)),
    "inst-c": dict(n=31, total=42, ones=22, five=0, eight=0, modality=(18, 12, 1),
                   duration=(12.7, 7.5), turns=(25.7, 16.4), checklist=(26.5, 16.4), mirs=(3.18, 0.54)),
}
EIGHT_PLUS_SESSIONS = 124
TOP_LEARNER = 20
# 2.50 +/- 2.89 over 410 learners and 1024 sessions.
TARGET_SUM_SQUARES = 5974
BETA_TURNS = 0.566
N_CASES = 30
N_REFLECTIONS = 840


def band(c):
    return 1 if c == 1 else 2 if c < 5 else 5 if c < 8 else 8


def site_counts(rng, spec, eight_total, top):
    """Feasible starting vector with the band sizes fixed."""
    n, ones, five, eight = spec["n"], spec["ones"], spec["five"], spec["eight"]
    counts = [1] * ones + [2] * (n - ones - five) + [5] * (five - eight) + [8] * eight
    if eight:
        # 8+ learners share eight_total sessions, one of them may carry the top count.
        extra = eight_total - 8 * eight
        idx = [i for i, c in enumerate(counts) if c == 8]
        if top:
            counts[idx[0]] = top
            extra -= top - 8
            idx = idx[1:]
        k = 0
        cap = (top or TOP_LEARNER) - 1
        while extra > 0:
            if counts[idx[k % len(idx)]] < cap:
                counts[idx[k % len(idx)]] += 1
                extra -= 1
            k += 1
    # Spread the remaining sessions over the 2-4 and 5-7 bands.
    remaining = spec["total"] - sum(counts)
    movable = [i for i, c in enumerate(counts) if 2 <= c < 8]
    while remaining > 0:
        i = rng.choice(movable)
        if counts[i] + 1 < (5 if counts[i] < 5 else 8):
            counts[i] += 1
            remaining -= 1
    assert remaining == 0, spec
    return counts


def balance_squares(rng, sites_counts, target):
    """Moves single sessions between learners of a site, keeping every band
    size fixed, until the overall sum of squares hits the target. The 8+
    learners have to absorb most of the spread: with them pinned to 124
    sessions an SD of 2.89 is out of reach."""
    def sq():
        return sum(c * c for cs in sites_counts.values() for c in cs)
    for _ in range(200000):
        cur = sq()
        if cur == target:
            return
        site = rng.choice(list(sites_counts))
        cs = sites_counts[site]
        i, j = rng.randrange(len(cs)), rng.randrange(len(cs))
        if i == j or cs[i] == TOP_LEARNER:
            continue
        # i gives a session to j. Band membership must not change.
        a, b = cs[i] - 1, cs[j] + 1
        if band(a) != band(cs[i]) or band(b) != band(cs[j]) or b >= TOP_LEARNER:
            continue
        delta = (a * a + b * b) - (cs[i] ** 2 + cs[j] ** 2)
        if (cur < target and delta > 0 and cur + delta <= target) or (cur > target and delta < 0 and cur + delta >= target):
            cs[i], cs[j] = a, b
    raise RuntimeError("could not reach target sum of squares")


def affine_to(x, mean, sd):
    x = np.asarray(x, dtype=float)
    return mean + sd * (x - x.mean()) / x.std(ddof=1)


def telemetry():
    rng = random.Random(20250106)
    nrng = np.random.default_rng(20250106)
    # Split the 8+ sessions between the two sites that have such learners.
    eight_a = 27
    counts = {
        "inst-a": site_counts(rng, SITES["inst-a"], eight_a, 0),
        "inst-b": site_counts(rng, SITES["inst-b"], EIGHT_PLUS_SESSIONS - eight_a, TOP_LEARNER),
        "inst-c": [1] * 22 + [2] * 7 + [3] * 2,
    }
    balance_squares(rng, counts, TARGET_SUM_SQUARES)

    case_effect = nrng.normal(0.0, 6.0, N_CASES)
    case_mirs = nrng.normal(0.0, 0.15, N_CASES)
    rows = []
    learner_no = 0
    session_no = 0
    base = dt.datetime(2024, 9, 2, 9, 0, 0, tzinfo=dt.timezone.utc)
    for site, cs in counts.items():
        spec = SITES[site]
        cs = cs[:]
        rng.shuffle(cs)
        voice_only, text_only, both = spec["modality"]
        multi = [i for i, c in enumerate(cs) if c >= 2]
        both_ids = set(rng.sample(multi, both))
        rest = [i for i in range(len(cs)) if i not in both_ids]
        rng.shuffle(rest)
        voice_ids = set(rest[:voice_only])
        site_rows = []
        for i, c in enumerate(cs):
            learner_no += 1
            learner = f"L{learner_no:04d}"
            if i in both_ids:
                mods = ["voice", "text"] + [rng.choice(["voice", "text"]) for _ in range(c - 2)]
                rng.shuffle(mods)
            else:
                mods = ["voice" if i in voice_ids else "text"] * c
            start = base + dt.timedelta(days=rng.randrange(0, 60), minutes=rng.randrange(0, 600))
            learner_eff = nrng.normal(0.0, 7.0)
            learner_mirs = nrng.normal(0.0, 0.35)
            when = start
            for k in range(c):
                session_no += 1
                when = when + dt.timedelta(days=rng.randrange(0, 5), hours=rng.randrange(1, 48))
                site_rows.append(dict(
                    session_id=f"S{session_no:05d}", learner_id=learner, institution_id=site,
                    case_id=f"case-{rng.randrange(N_CASES) + 1:02d}", case_version=1, modality=mods[k],
                    completed_at=when, k=k + 1, learner_eff=learner_eff, learner_mirs=learner_mirs))
        m = len(site_rows)
        turns = affine_to(nrng.normal(size=m), *spec["turns"])
        turns = np.clip(np.rint(turns), 4, None).astype(int)
        dur_z = 0.6 * (turns - turns.mean()) / turns.std() + 0.8 * nrng.normal(size=m)
        duration = np.clip(affine_to(dur_z, *spec["duration"]), 1.0, 30.0)
        cmean = spec["checklist"][0] - BETA_TURNS * spec["turns"][0]
        chk, mirs = [], []
        for r, t in zip(site_rows, turns):
            cidx = int(r["case_id"][5:]) - 1
            chk.append(cmean + BETA_TURNS * t + case_effect[cidx] + r["learner_eff"] + nrng.normal(0.0, 7.0))
            mirs.append(case_mirs[cidx] + r["learner_mirs"] + 0.019 * r["k"]
                        - (0.132 if r["modality"] == "voice" else 0.0) + nrng.normal(0.0, 0.5))
        # Centre each site on its target means; slopes are untouched by the shift.
        chk = np.asarray(chk) - np.mean(chk) + spec["checklist"][0]
        mirs = np.asarray(mirs) - np.mean(mirs) + spec["mirs"][0]
        for r, t, d, c, m_ in zip(site_rows, turns, duration, chk, mirs):
            r.update(turn_count=int(t), duration_minutes=round(float(d), 1),
                     checklist_completion_pct=round(float(np.clip(c, 0.0, 100.0)), 1),
                     mirs_overall=round(float(np.clip(m_, 1.0, 5.0)), 3))
        rows.extend(site_rows)

    with_reflection = set(rng.sample(range(len(rows)), N_REFLECTIONS))
    for i, r in enumerate(rows):
        r["reflection_char_length"] = int(np.clip(nrng.lognormal(5.3, 0.6), 12, 2000)) if i in with_reflection else 0
    rows.sort(key=lambda r: r["completed_at"])
    with open(OUT / "telemetry_multisite.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TELEMETRY_COLUMNS)
        for r in rows:
            w.writerow([r["session_id"], r["learner_id"], r["institution_id"], r["case_id"], r["case_version"],
                        r["modality"], f'{r["duration_minutes"]:.1f}', r["turn_count"],
                        f'{r["checklist_completion_pct"]:.1f}', f'{r["mirs_overall"]:.3f}',
                        r["reflection_char_length"], r["completed_at"].strftime("%Y-%m-%dT%H:%M:%SZ"), "false"])
    per_learner = [c for cs in counts.values() for c in cs]
    n = len(per_learner)
    mean = sum(per_learner) / n
    sd = (sum((c - mean) ** 2 for c in per_learner) / (n - 1)) ** 0.5
    print(f"telemetry: {len(rows)} sessions, {n} learners, cases/student {mean:.4f}+/-{sd:.4f}, "
          f"2+ {100 * sum(c >= 2 for c in per_learner) / n:.2f}%")


def telemetry_small():
    # Two learners, one aborted session in the middle of learner L1's history.
    rows = [
        ("s1", "L1", "inst-a", "case-01", 1, "text", "12.0", 20, "50.0", "3.000", 120, "2025-01-06T10:00:00Z", "false"),
        ("s2", "L1", "inst-a", "case-02", 1, "text", "3.5", 4, "NA", "NA", 0, "2025-01-07T10:00:00Z", "true"),
        ("s3", "L1", "inst-a", "case-01", 1, "voice", "18.0", 30, "75.0", "3.400", 200, "2025-01-08T10:00:00Z", "false"),
        ("s4", "L2", "inst-b", "case-03", 1, "voice", "22.0", 44, "66.7", "3.900", 0, "2025-01-06T11:00:00Z", "false"),
        ("s5", "L2", "inst-b", "case-01", 1, "voice", "25.0", 40, "58.3", "3.700", 64, "2025-01-09T11:00:00Z", "false"),
        ("s6", "L3", "inst-c", "case-02", 1, "text", "9.0", 14, "25.0", "2.950", 0, "2025-01-10T09:30:00Z", "false"),
    ]
    with open(OUT / "telemetry_small.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TELEMETRY_COLUMNS)
        w.writerows(rows)


def agreement():
    """1976 human/AI pairs over 104 transcripts x 19 items.

    642 exact, 1267 within one point, 1719 on the same side of the 2|3 line:
    32.5%, 64.1% and 87.0% at one decimal.
    """
    rng = random.Random(1976)
    exact_pool = [(3, 3)] * 260 + [(4, 4)] * 230 + [(2, 2)] * 70 + [(5, 5)] * 52 + [(1, 1)] * 30
    adjacent_cross = [(2, 3)] * 80 + [(3, 2)] * 70
    adjacent_same = [(3, 4)] * 190 + [(4, 3)] * 160 + [(4, 5)] * 60 + [(5, 4)] * 45 + [(1, 2)] * 10 + [(2, 1)] * 10
    far_cross = [(1, 3)] * 20 + [(2, 4)] * 40 + [(4, 2)] * 25 + [(3, 1)] * 10 + [(2, 5)] * 7 + [(5, 2)] * 5
    far_same = [(3, 5)] * 300 + [(5, 3)] * 302
    pairs = exact_pool + adjacent_cross + adjacent_same + far_cross + far_same
    assert len(exact_pool) == 642 and len(pairs) == 1976
    assert len(adjacent_cross) + len(adjacent_same) == 625
    assert len(adjacent_cross) + len(far_cross) == 257
    rng.shuffle(pairs)
    mirs = yaml.safe_load((ROOT / "data" / "rubrics" / "mirs.yaml").read_text())
    # Applicable items for the validation cases, minus the two audio-dependent ones.
    items = [it["id"] for it in mirs["items"] if not it["applicability_tags"]]
    items = [i for i in items if i not in ("MIRS08", "MIRS26")]
    assert len(items) == 19, len(items)
    keys = [(f"T{t + 1:03d}", item) for t in range(104) for item in items]
    for name, side in (("agreement_human.csv", 0), ("agreement_ai.csv", 1)):
        with open(OUT / name, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["transcript_id", "item_id", "score"])
            for (tid, item), p in zip(keys, pairs):
                w.writerow([tid, item, p[side]])


def element_sheets():
    """Item scores for a few whole-rubric sheets plus the per-element means a
    spreadsheet would compute from them (exact fractions, printed to 17 digits)."""
    rng = random.Random(28)
    mirs = yaml.safe_load((ROOT / "data" / "rubrics" / "mirs.yaml").read_text())
    emap = yaml.safe_load((ROOT / "data" / "rubrics" / "mirs_kalamazoo.yaml").read_text())["elements"]
    items = [it["id"] for it in mirs["items"]]
    tagged = {it["id"] for it in mirs["items"] if it["applicability_tags"]}
    sheets = {}
    sheets["all-scored"] = {i: rng.randint(1, 5) for i in items}
    sheets["case-na"] = {i: ("N/A" if i in tagged else rng.randint(1, 5)) for i in items}
    closure = {i for i, e in emap.items() if e == "provide_closure"}
    sheets["no-closure"] = {i: ("N/A" if i in closure else rng.randint(1, 5)) for i in items}
    sheets["floor"] = {i: 1 for i in items}
    with open(OUT / "element_scores.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sheet", "item_id", "score"])
        for name, scores in sheets.items():
            for i in items:
                w.writerow([name, i, scores[i]])
    elements = sorted(set(emap.values()))
    with open(OUT / "element_means.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sheet", "element", "mean"])
        for name, scores in sheets.items():
            for e in elements:
                vals = [scores[i] for i in items if emap.get(i) == e and scores[i] != "N/A"]
                w.writerow([name, e, "omitted" if not vals else repr(float(Fraction(sum(vals), len(vals))))])


def reflection_themes():
    themes = [
        ("Missed/forgotten items", 221, "26.3", "I forgot to ask if she uses any supplements."),
        ("Organization & flow of interview", 193, "23.0", "I wish I had asked questions in a more systematic way."),
        ("ROS & history-taking technique", 188, "22.4", "Needed more time for the ROS; I rushed it."),
        ("Empathy/rapport & caregiver management", 154, "18.3", "I didn't know how to console the mother in such a stressful situation."),
        ("Differential/clinical reasoning", 111, "13.2", "Once a fever was mentioned, I got anchored too early."),
        ("Time & logistics/tech issues", 104, "12.4", "The mic kept disconnecting during the session."),
        ("Third-party/limited communication", 96, "11.4", "It was weird only talking to the parent instead of the patient."),
        ("Knowledge/confidence gaps", 47, "5.6", "I'm not well versed in taking a focused neuro history."),
        ("Checklist vs. conversation tension", 33, "3.9", "The interview felt too bullet-point oriented."),
    ]
    with open(OUT / "reflection_themes.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["theme", "count", "pct_of_840", "example"])
        w.writerows(themes)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    telemetry()
    telemetry_small()
    agreement()
    element_sheets()
    reflection_themes()
