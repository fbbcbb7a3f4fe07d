"""cellrtc: a deterministic subframe-level simulator of a cellular downlink
carrying real-time video, with physical-layer-informed rate control and
delay-gradient / fixed-window baselines.
"""
from .baselines import GccController, GccParams, PbeController, gcc_step, pbe_step
from .channel import (ChannelModel, Constant, DeepFadeInjector, RandomWalk,
                      StepSequence, load_trace)
from .config import (ScenarioConfig, load_config, mix_seed, parse_config,
                     save_config, to_dict, validate)
from .controller import (CapacityEstimate, ControllerDecision, MinWindow,
                         OccController, OccParams, apply_app_limit_margin,
                         detect_bottleneck, identify_frame_interval,
                         measure_abw, smooth_target)
from .engine import (FlowRuntime, InternetSegment, RunResult,
                     delivered_bits_between, run_scenario)
from .metrics import (FlowMetrics, STALL_THRESHOLD_MS, compute_flow_metrics,
                      estimation_accuracy, frame_latencies, jain_index,
                      percentile, valid_bitrate)
from .ran import (Cell, DlBuffer, ProportionalFair, RoundRobin, SubframeReport,
                  schedule_subframe)
from .sender import (AppLimitTrace, Burst, DutyCycle, EncoderModel, Packet,
                     PacingMultiplier, Sender, VideoFrame, pace)

__version__ = "0.1.0"
