#!/usr/bin/env python3
"""
Script for å kjøre hele scenariokorpuset og samle oppsummeringene

Hver variant får sine CSV/JSON-filer i ut-mappen, og en samlet
corpus_summary.csv gjør det enkelt å sammenligne theta/ell/eps0-sweepene.
"""
import os
import sys

import pandas as pd

from dosvokter import corpus
from dosvokter.errors import DosVokterError
from dosvokter.outputs import write_outputs
from dosvokter.runner import run_batch
from dosvokter.settings import DEFAULT_OUT_DIR

SUMMARY_COLUMNS = [
    "scenario", "controller", "reliability_time", "final_bd_hat", "final_bf_hat",
    "settling_time", "peak_state_norm", "final_delta", "delta_supremum",
]


def run_all(out_dir: str) -> pd.DataFrame:
    """Kjør alle scenarier; returner én rad per variant"""
    rows = []
    for name, _ in corpus.list_scenarios():
        print(f"🛰️  {name}")
        try:
            results = run_batch(corpus.load(name))
        except DosVokterError as exc:
            print(f"   ❌ {exc}")
            continue
        for result in results:
            write_outputs(result, out_dir)
            rows.append(result.summary.model_dump())
            print(f"   ✅ {result.config.name}: reliability {result.summary.reliability_time}")
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def main():
    """Hovedfunksjon - kjør korpuset og lagre oversikten"""
    out_dir = sys.argv[1] if len(sys.argv) > 1 else DEFAULT_OUT_DIR

    print("🛡️  DosVokter corpus run")
    print("=" * 40)

    df = run_all(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "corpus_summary.csv")
    df.to_csv(path, index=False, lineterminator="\n")

    print(f"\n📊 {len(df)} varianter kjørt, oversikt i {path}")
    print(df[["scenario", "reliability_time", "final_bd_hat", "final_bf_hat"]].to_string(index=False))
    return df


if __name__ == "__main__":
    main()
