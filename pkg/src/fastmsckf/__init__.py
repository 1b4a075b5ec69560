"""Visual-inertial odometry with sliding-window camera poses.

An error-state Kalman filter that stores recent camera poses instead of
landmarks, plus two feature-management policies (per-frame extraction and
keyframe extraction), a synthetic scenario generator, dataset replay, and
an evaluation harness.
"""

from .augment import Extrinsics, augment
from .evaluate import (align_and_interpolate, final_point_error_pct,
                       nfmin_sweep, rmse_orientation_deg, rmse_position,
                       summarize, timing_stats)
from .pipeline import PipelineConfig, RunResult, VioPipeline, dead_reckon
from .policy import (MODE_FMSCKF, MODE_MSCKF, PolicyConfig, TrackerLedger,
                     Trigger, UpdateDecision, on_frame, prune_clones)
from .propagation import ImuSample, NoiseConfig, propagate
from .sim import (FrameObservations, GroundTruth, ScenarioConfig,
                  generate_trajectory, synthesize_imu, synthesize_tracks)
from .state import (CameraClone, FilterState, ImuState, InitialConditions,
                    apply_correction, new_filter_state, symmetrize)
from .triangulate import (FeatureTrack, NotTriangulatable,
                          TriangulationResult, linear_init, refine,
                          triangulate)
from .update import (BehindCamera, DegenerateFeature, FeatureUpdateBlock,
                     StackedUpdate, ekf_update, feature_jacobians,
                     mahalanobis_gate, nullspace_project, predict_observation,
                     stack_and_compress)

__version__ = "0.1.0"
