"""Desk-scale simulation of everting inflated-beam robots whose bending is
steered by patterned layer jamming: a shared tendon pull bends whichever
joint was left soft, and re-jamming locks it.

The pieces: `model` holds the rigidity and joint laws, `statics` the chain
equilibrium solver, `calibration` the bench fitting, `session` the stateful
command interpreter, `planner` the stiffen-bend-lock sequencer and
`workspace` the reachable-set sampler.
"""

from .model import (MaterialModel, RobotDescription, SectionState, JointLaw,
                    FlexuralTest, DEFAULT_INTERNAL_GAUGE_PA,
                    effective_rigidity, flexural_modulus, joint_law,
                    joint_laws_for_sections, skin_flexural_rigidity,
                    wrinkling_moment, collapse_moment, jammed_state,
                    unjammed_state)
from .statics import (ChainModel, EquilibriumResult, TendonState,
                      TwoSegmentResult, cantilever_tip_force,
                      chain_for_states, forward_kinematics,
                      solve_equilibrium, solve_tendon_displacement,
                      virtual_two_segment_test)
from .calibration import (Anchor, CalibrationAnchors, CalibrationError,
                          CalibrationReport, anchors_from_dict,
                          anchors_to_dict, bench_force, consistency_ratio,
                          fit_parameters, reference_anchor_set,
                          synthetic_anchor_set)
from .commands import (Command, CommandScript, Grow, PullTendon,
                       ReleaseTendon, Retract, SetPouch, WaitEquilibrium)
from .session import (ReplayError, Scenario, ScenarioError, Session,
                      load_log, load_scenario, replay_log, save_scenario)
from .planner import (AllocationError, PlanResult, PlanningError,
                      TargetConfiguration, allocate_tensions,
                      inverse_single_joint, plan_simultaneous,
                      plan_stiffen_bend_lock)
from .workspace import (WorkspaceResult, expansion_ratio, sample_workspace,
                        save_points_csv, tension_sensitivity)

__version__ = "0.1.0"
