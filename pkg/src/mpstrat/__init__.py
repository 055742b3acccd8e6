"""Learning misinformation-prevention strategies from attacker/protector examples."""
from .diffusion import TiePolicy, TriggeringModel, prevention_value, simulate
from .errors import ValidationError
from .features import FeatureBank, IidEdges, ModelMatched, ScoreModel, build_feature_bank
from .graph import Graph, WeightedSubgraph, generate_er, generate_powerlaw, load_edge_list, node_set
from .inference import greedy_max_score, lai_modular_modular
from .losses import LossSpec
from .training import TrainerConfig, TrainingPair, one_slack_cutting_plane

__version__ = "0.1.0"
