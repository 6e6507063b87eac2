"""Regenerate the synthetic COMPAS-shaped fixture.

The rows are invented. They follow the column names of the public ProPublica
release and roughly its race-wise recidivism marginals (about 52% for Black
and 39% for White defendants), and include a few rows that the standard
cleaning filters drop. No real person is represented.
"""

import csv
import sys
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "mistreatment" / "fixtures" / "compas_mini.csv"
COLUMNS = [
    "id", "age_cat", "sex", "race", "priors_count", "c_charge_degree",
    "days_b_screening_arrest", "is_recid", "score_text", "two_year_recid",
]


def main(path=OUT, n=200, seed=20170403):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        race = rng.choice(["African-American", "Caucasian", "Hispanic"], p=[0.57, 0.38, 0.05])
        age = rng.choice(["Less than 25", "25 - 45", "Greater than 45"], p=[0.22, 0.57, 0.21])
        sex = rng.choice(["Male", "Female"], p=[0.81, 0.19])
        priors = int(min(37, rng.poisson(4.2 if race == "African-American" else 2.4)))
        charge = rng.choice(["F", "M"], p=[0.65, 0.35])
        # logistic propensity loosely shaped like the public data
        t = -0.9 + 0.18 * priors + {"Less than 25": 0.7, "25 - 45": 0.0, "Greater than 45": -0.8}[age]
        t += 0.25 if race == "African-American" else 0.0
        t += 0.15 if charge == "F" else 0.0
        t -= 0.3 if sex == "Female" else 0.0
        recid = int(rng.random() < 1 / (1 + np.exp(-t)))
        days = int(rng.integers(-45, 46)) if rng.random() < 0.08 else int(rng.integers(-3, 4))
        is_recid = -1 if rng.random() < 0.02 else recid
        if rng.random() < 0.02:
            charge = "O"
        score = "N/A" if rng.random() < 0.01 else rng.choice(["Low", "Medium", "High"])
        rows.append([i + 1, age, sex, race, priors, charge, days, is_recid, score, recid])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        w.writerows(rows)


if __name__ == "__main__":
    main(*(sys.argv[1:2] or []))
