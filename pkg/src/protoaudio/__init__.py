"""Few-shot audio classification toolkit.

Mel-spectrogram preprocessing, a prototypical-network episodic pipeline on a
small self-contained autodiff engine, equivalence statistics and a
config-driven experiment runner. The convolution hot loops run in a compiled
extension when available, with a numpy fallback (`protoaudio.kernels.BACKEND`
names the active one).
"""

__version__ = "0.1.0"

from . import audio_io, autodiff, backbone, features, fewshot, kernels, stats, synth, tsne

__all__ = [
    "audio_io",
    "autodiff",
    "backbone",
    "features",
    "fewshot",
    "kernels",
    "stats",
    "synth",
    "tsne",
    "__version__",
]
