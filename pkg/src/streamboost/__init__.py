"""Streaming gradient boosting with no-regret weak learners."""
from .batch_gb import BatchGBModel, train_batch_gb
from .dataset import Dataset, Sample, load_csv, load_libsvm, split, stream
from .losses import LossAtSample, LossSpec
from .metrics import RegretRecord, comparator_fit, counterexample_run, sweep_n, sweep_t
from .sgb_nonsmooth import SGBResidual, c_constant, nonsmooth_bound, project
from .sgb_smooth import SGBSmooth, default_eta, smooth_bound
from .weak_learners import (AxisRestricted, BufferedTree, EdgeReport, FTRLLinear, OnlineLinear,
                            edge_existence_check, make_learner, measure_edge)

__version__ = "0.1.0"
