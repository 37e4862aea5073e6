"""
Loading a price panel and turning it into log-returns
=====================================================

A price CSV rarely arrives clean: tickers appear mid-history, drop out, or
have missing cells.  The ingest step applies one continuity policy — a short
gap is forward-filled, a long gap disqualifies the ticker — so everything
downstream works on a dense panel.
"""

import tempfile
from pathlib import Path

import numpy as np

from marketstates import ContinuityPolicy, load_prices, log_returns

scratch = Path(tempfile.mkdtemp(prefix="ingest_demo_"))

# --- 1. a small, deliberately messy price file ----------------------------
# GOOD has full history.  HOLEY is missing two isolated days (fine: filled).
# GONE is missing four days in a row (dropped by the default policy).
rng = np.random.default_rng(42)
days = [f"2021-03-{d:02d}" for d in range(1, 13)]
path = scratch / "prices.csv"
rows = {
    "GOOD": [f"{p:.2f}" for p in 100 * np.exp(np.cumsum(0.01 * rng.standard_normal(12)))],
    "HOLEY": [f"{p:.2f}" for p in 40 * np.exp(np.cumsum(0.01 * rng.standard_normal(12)))],
    "GONE": [f"{p:.2f}" for p in 70 * np.exp(np.cumsum(0.01 * rng.standard_normal(12)))],
}
rows["HOLEY"][3] = ""          # one-day hole
rows["HOLEY"][8] = "NaN"       # another, spelled differently
for d in range(5, 9):          # four consecutive missing days
    rows["GONE"][d] = ""
with path.open("w") as fh:
    fh.write("date,GOOD,HOLEY,GONE\n")
    for t, day in enumerate(days):
        fh.write(",".join([day] + [rows[n][t] for n in ("GOOD", "HOLEY", "GONE")]) + "\n")
print(f"wrote {path}")

# --- 2. ingest with the default policy (up to 2 consecutive gaps filled) ---
panel = load_prices(path, ContinuityPolicy(max_consecutive_missing=2))
print(f"\nkept tickers: {panel.tickers}")
for name, reason in panel.dropped.items():
    print(f"dropped {name}: {reason}")

# The one-day holes in HOLEY were forward-filled, so the panel is dense:
print(f"panel is finite everywhere: {np.isfinite(panel.prices).all()}")

# --- 3. log-returns --------------------------------------------------------
returns = log_returns(panel)
print(f"\n{panel.n_days} price days -> {returns.n_returns} return days")
print("first three GOOD returns:", np.round(returns.returns[0, :3], 6))

# A forward-filled day repeats the previous price, so its return is exactly 0:
holey = returns.returns[returns.tickers.index("HOLEY")]
print("HOLEY returns around the filled day:", np.round(holey[1:4], 6))
print("zero return into the filled day:", holey[2] == 0.0)
