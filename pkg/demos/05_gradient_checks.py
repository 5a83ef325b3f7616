#!/usr/bin/env python3
"""Verify every hand-derived backward pass against finite differences.

All gradients in this package are derived by hand; nothing is trusted
until central differences agree. This runs the same gate as
`actionseq grad-check`: both recurrent cells, the four full sequence
losses, and the joint two-stage caption loss.
"""

from actionseq.checks import THRESHOLD, gradient_gate

worst = 0.0
for name, err in gradient_gate():
    status = "ok" if err < THRESHOLD else "FAIL"
    print(f"{name:<18} max relative error {err:.3e}  {status}")
    worst = max(worst, err)
print(f"\nworst {worst:.3e} (threshold {THRESHOLD:.0e})")
