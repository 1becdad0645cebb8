"""ocrforge: tooling around OCR line-recognizer training pipelines.

Submodules:
    lineimg   line-image loading, deskew, rescale, binarization
    augment   stochastic augmentation operators and plan execution
    nags      CRNN architecture family, validation, grid enumeration
    evalcer   edit distance, transcript harmonization, codecs, CER reports
    vote      per-fold hypothesis voting
    orchestra corpora, splits, ablation stages, jobs, result reports
    kernels   compiled/pure kernel backend selection
"""

__version__ = "0.1.0"
