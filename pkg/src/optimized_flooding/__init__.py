from .version import __version__ as __version__
from .geometry import Point as Point
from .geometry import Region as Region
from .geometry import StrategicCandidate as StrategicCandidate
from .geometry import hex_vertices as hex_vertices
from .geometry import forward_candidates as forward_candidates
from .geometry import nearest_strategic as nearest_strategic
from .geometry import ideal_lattice as ideal_lattice
from .geometry import outward_candidate as outward_candidate
from .packet import BroadcastPacket as BroadcastPacket
from .packet import PacketId as PacketId
from .packet import HopStage as HopStage
from .protocol import OfpParams as OfpParams
from .protocol import NodePacketState as NodePacketState
from .protocol import Discard as Discard
from .protocol import Schedule as Schedule
from .protocol import Transmit as Transmit
from .protocol import compute_delay as compute_delay
from .protocol import ofp_on_receive as ofp_on_receive
from .protocol import ofp_on_timer as ofp_on_timer
from .protocol import OfpProtocol as OfpProtocol
from .baselines import BaselineParams as BaselineParams
from .baselines import ahbp_select_brgs as ahbp_select_brgs
from .radio import RadioModel as RadioModel
from .mobility import MobilityModel as MobilityModel
from .config import ScenarioConfig as ScenarioConfig
from .config import ProtocolSpec as ProtocolSpec
from .config import parse_config as parse_config
from .config import emit_config as emit_config
from .sim import TrialMetrics as TrialMetrics
from .sim import place_nodes as place_nodes
from .sim import run_trial as run_trial
from .stats import AggregateMetrics as AggregateMetrics
from .stats import run_until_ci as run_until_ci
from .presets import preset as preset
from .experiment import run_experiment as run_experiment
from .experiment import render_skew as render_skew
