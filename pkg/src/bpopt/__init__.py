"""Anytime robot base-pose optimization and benchmarking toolkit."""

from .se3 import (DistanceWeights, Pose, axis_angle_to_rotation, compose,
                  hammersley_points, invert, pose_distance, pose_from_params,
                  rotation_angle)
from .robot import (Box, Capsule, JointSpec, RobotModel, Sphere,
                    collision_free, forward_kinematics, geometric_jacobian,
                    link_frames, load_robot, max_reach, primitive_distance,
                    reference_robot, save_robot)
from .task import (BaseDomain, GoalPose, Task, TaskSet, clamp_params,
                   gen_edge, gen_hard, gen_simple, load_task,
                   sample_base_params, save_task)
from .solver import (IKResult, JointPath, SolveOutcome, SolverLimits,
                     Trajectory, evaluate_base_pose, filter_reach,
                     rrt_connect, solve_ik, time_parameterize)
from .optimizers import (Budget, BudgetMeter, BOConfig, GAConfig, SGDConfig,
                         OptRunRecord, adam_step, expected_improvement,
                         ga_crossover, ga_mutate, gp_fit, ik_distance_gradient,
                         opt_bo, opt_dummy, opt_ga, opt_random, opt_sgd,
                         run_optimizer)
from .bench import (BenchConfig, SummaryStats, bootstrap_ci, build_curves,
                    emit_report, run_benchmark, success_rate)

__version__ = "0.1.0"
