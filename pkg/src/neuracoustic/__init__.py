"""Auditory-nerve neurogram simulation and neurogram similarity (NSIM) scoring.

Subpackages map onto the processing chain: :mod:`stimulus` (speech material
and degradations), :mod:`periphery` (spike generation), :mod:`neurogram`
(MR/FT neurograms and file format), :mod:`similarity` (SSI/NSI/NSIM),
:mod:`regression` (epsilon-SVR), :mod:`studies` and :mod:`report`.
"""

__version__ = "0.1.0"

from .neurogram import (Neurogram, NeurogramSpec, build_neurogram, neurograms_from_bank, read_neurogram,
                        write_neurogram)
from .periphery import (NO_CND, SLOPING_LOSS, Audiogram, CNDProfile, FiberType, PeripheryConfig,
                        simulate_fiber_bank)
from .regression import (FEATURES, FeatureRow, SVRHyperparams, grid_search, kfold_cv, predict, table3_grid,
                         train_svr)
from .report import emit_report
from .similarity import SimilarityConfig, gaussian_window, nsi_map, nsim, overall_nsim, ssi
from .stimulus import StimulusCondition, Waveform, load_wav, prepare_stimulus, scale_to_spl
from .studies import HearingProfile, cnd_effect, pta, study1_features, study2_sweep, table2_profiles
