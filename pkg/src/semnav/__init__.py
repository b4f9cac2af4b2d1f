"""Desk-scale object-goal navigation: layered semantic mapping, value-map
fusion, target prediction and frontier exploration on 2D grids."""

from .config import ConfigError, EpisodeConfig, load_config, parse_config
from .episodes import EpisodeResult, SuiteSummary, run_episode, run_suite, spl, sr
from .grids import Detection, LayeredMap, update_multi_maps, update_target_confidence
from .planning import Path, Unreachable, astar, extract_waypoint, local_step
from .policy import (DarWeights, GoalDecision, LockMode, SciReading,
                     compute_sci, dar_score, decide, select_frontier,
                     try_lock_target, weights_from_sci)
from .prediction import (CooccurrencePrior, DistanceMap, PredictedTargets,
                         distance_map, predict_targets, remote_predict)
from .scenes import Scene, SceneError, load_scene, parse_scene, save_scene
from .values import ValueMap, polar_to_cartesian, smooth_and_normalize, update_value_cell
from .world import (Action, AgentPose, DetectionNoise, Observation, ScoreModel,
                    observe, pose_cell, semantic_score, step, visible_cells)

__version__ = "0.1.0"
