"""Balanced-risk imitation learning from noisy demonstrations on tabular MDPs."""
from .errors import ConfigError, DomainError, InvariantError
from .losses import LossSpec, eval_loss, eval_loss_grad, normalize, symmetry_defect
from .mdp import (MdpSpec, StateActionDensity, TabularPolicy, expected_return, gridworld,
                  occupancy_exact, random_mdp, snapshot_policies, value_iteration)
from .demos import DemoDataset, Provenance, generate_noisy_dataset, split_dataset
from .risk import Classifier, RiskReport, balanced_risk_exact, empirical_risk_co, lemma1_decompose
from .pseudo import PseudoBatch, co_pseudo_label, self_pseudo_label
from .trainer import (EvalMonitor, TrainerConfig, TrainRecord, rl_step, synth_reward, train,
                      train_baseline, train_ril_co)
from .verify import VerificationReport, density_matching_optimum, kappa_estimate

__version__ = "0.1.0"
