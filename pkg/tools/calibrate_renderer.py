"""Fit the thickness gain and the renderer round-trip medians.

Run once; paste the printed constants into src/cfaudit/renderer.py. The
test-suite recomputes both and checks they still match the frozen values.
"""

import numpy as np

from cfaudit import renderer
from cfaudit.renderer import RenderParams


def main():
    attrs, _, images = renderer.calibration_corpus(2000, renderer.CALIBRATION_SEED)
    gain = renderer.fit_thickness_gain(attrs, images)
    print(f"THICKNESS_GAIN = {gain!r}")
    params = RenderParams(thickness_gain=gain)
    attrs, _, images = renderer.calibration_corpus(1000, renderer.ROUNDTRIP_SEED, params)
    errs = renderer.roundtrip_errors(attrs, images, params)
    medians = {k: float(np.median(v)) for k, v in errs.items()}
    print(f"ROUNDTRIP_MEDIANS = {medians!r}")


if __name__ == "__main__":
    main()
