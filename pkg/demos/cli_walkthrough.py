"""
The same pipeline from the command line
=======================================

Each step below is one ``nfpos`` subcommand. They are called through
``nfpos.cli.main`` so the script runs without a shell.
"""
import tempfile
from pathlib import Path

from nfpos.cli import main

work = Path(tempfile.mkdtemp(prefix="nfpos-demo-"))
print("working in", work)

# %%
# Geometry first: Fresnel region and the path-difference table.
main(["fresnel", "--n", "64", "--ranges", "2", "10"])

# %%
# Two tiny datasets that differ only in SNR.
for snr in ("20", "0"):
    main(["gen-data", "--snr", snr, "--snapshots", "100", "--n-train", "120", "--n-test", "40",
          "--seed", "3", "--out", str(work / f"snr{snr}")])

# %%
# One narrow model per dataset, then an evaluation report for each.
for snr in ("20", "0"):
    main(["train", "--data", str(work / f"snr{snr}"), "--width", "8", "--epochs", "5", "--quiet",
          "--out", str(work / f"run{snr}")])
    main(["eval", "--checkpoint", str(work / f"run{snr}" / "checkpoint"), "--data", str(work / f"snr{snr}"),
          "--out", str(work / f"report{snr}")])

# %%
# Side by side, with the gap to the first run in dB.
main(["compare", str(work / "report20"), str(work / "report0"), "--names", "20dB,0dB"])
