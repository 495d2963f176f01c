"""wxforge: adverse-weather image augmentation and embedding-distance toolkit.

Synthesizes weather/lighting variants of annotated driving images (seven
families x five intensity levels, labels inherited) and scores image sets
against trigger conditions with feature-embedding distances (FID, CMMD, and
their contrastive variants), including the correlation studies used for
training-data selection.
"""

__version__ = "0.1.0"
