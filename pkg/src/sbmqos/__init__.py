"""Multi-hop delay QoS analysis with sliding block martingales."""
from .channel import ChannelConfig, ServiceProcess, draw_service, draw_services, path_loss_db
from .traffic import TrafficConfig, generate_arrivals
from .tandem import CensoredDelay, QueueTrace, TandemTrace, delay, delay_unreliability, simulate
from .martingale import MartingaleView, RateFunction, backlog_martingale, estimate_rate, sliding_block_martingale
from .bounds import DupbResult, XmsbEstimate, dupb, estimate_xmsb, rmse
from .solver import (ThetaSolution, UpcrossingPartition, count_exceedances, max_occurrence_rate, solve_theta,
                     upcrossing_bound)
from .provision import ProvisionResult, QosTarget, minimum_service_rate
from .montecarlo import ComparisonReport, Scenario, run_hop_sweep, run_scenario

__version__ = "0.1.0"
