"""Per-class statistics of the procedural roster: spectral flux, level stability, spectrum.

Useful when editing the roster: foreground classes should show clearly higher
flux than backgrounds, and backgrounds should hold their level across seconds.
"""
import argparse

import numpy as np

from ambisep.frontend import FrontendConfig
from ambisep.features import filterbank_for, mel_spectrogram
from ambisep.synth import DEFAULT_ROSTER, spectral_flux, synth_background, synth_event


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--draws", type=int, default=20)
    args = p.parse_args()
    cfg = FrontendConfig()
    centres = filterbank_for(cfg).center_hz
    print(f"{'class':28s} {'kind':10s} {'seen':5s} {'flux':>6s} {'rms spread dB':>14s} {'centroid Hz':>12s}")
    for cls in DEFAULT_ROSTER:
        make = synth_event if cls.kind == "foreground" else synth_background
        flux, spread, centroid = [], [], []
        for seed in range(args.draws):
            clip = make(cls, seed)
            x = clip.samples
            flux.append(spectral_flux(clip))
            sec = [np.sqrt(np.mean(x[i * 44100:(i + 1) * 44100] ** 2)) + 1e-12 for i in range(len(x) // 44100)]
            spread.append(20 * np.log10(max(sec) / min(sec)))
            mel = mel_spectrogram(clip, cfg).sum(axis=0)
            centroid.append(float(np.sum(centres * mel) / (mel.sum() + 1e-12)))
        print(f"{cls.name:28s} {cls.kind:10s} {str(cls.seen):5s} {np.mean(flux):6.3f} "
              f"{np.mean(spread):14.2f} {np.mean(centroid):12.0f}")


if __name__ == "__main__":
    main()
