"""trajpref: decode pairwise trajectory preferences from multichannel
signals and aggregate them into trajectory rankings.

The package covers the full chain: synthetic session generation
(:mod:`trajpref.synth`), signal preprocessing and window extraction
(:mod:`trajpref.signals`), covariance/tangent-space classification
(:mod:`trajpref.spd`, :mod:`trajpref.classify`), verdict aggregation into
rankings (:mod:`trajpref.rank`), and evaluation against ground-truth
distances (:mod:`trajpref.evaluation`), orchestrated by
:mod:`trajpref.pipeline` and the ``trajpref`` command line tool.
"""

__version__ = "0.1.0"

from .errors import TrajprefError

__all__ = ["TrajprefError", "__version__"]
