"""Sample-and-hold stabilization toolkit for control systems whose inputs
may grow unboundedly near the target, together with their rescaled and
control-compactified (impulsive) extensions, class-KL descent machinery,
control Lyapunov function certification, and feedback synthesis."""

from .core import (
    ControlPolynomialSystem,
    GrowthRate,
    KLCheckReport,
    KLFunction,
    Partition,
    Target,
    TerminationStatus,
    TrajectoryRecord,
    eval_dynamics,
    kl_check,
    nu_eval,
    nu_inverse,
)
from .errors import (
    CertificationError,
    ConfigError,
    ControlSetError,
    DecayError,
    DomainError,
    FeedbackError,
    ImpulsiveControlError,
    InvariantError,
    ProjectionError,
    SampleStabError,
    StrictnessError,
    WindowError,
)
from .transforms import (
    ExtendedControl,
    ExtendedSystem,
    RescaledSystem,
    RestrictedControlSet,
    control_to_extended,
    extended_dynamics,
    extended_to_control,
    rescaled_dynamics,
    time_change_backward,
    time_change_forward,
)
from .sampling import (
    Feedback,
    PiecewiseConstantSignal,
    SimOptions,
    simulate_open_loop,
    simulate_sample_hold,
    trajectory_csv_text,
    trajectory_to_csv,
    uniform_partition,
)
from .clf import (
    CLFReport,
    ExtendedControlGrid,
    LyapunovCandidate,
    NCurve,
    OriginalControlGrid,
    compute_N,
    compute_N_curve,
    decrease_check,
    feedback_to_extended,
    hamiltonian_extended,
    hamiltonian_original,
    project_feedback,
    synthesize_feedback_extended,
    synthesized_feedbacks,
)
from .gac import (
    BoundReport,
    DwellTimes,
    PiecewiseB,
    StabilizationReport,
    StripSystem,
    certify_sample_stabilizability,
    descent_times,
    kl_majorant,
    piecewise_b,
    sigma_from_runs,
    strip_radii,
    verify_descent,
    verify_sigma_bound,
)
from .example import (
    ExampleFixture,
    closed_form_constant_control,
    closed_form_jump,
    cubic_damped_fixture,
    cubic_damped_system,
    node_contraction_ratio,
)

__version__ = "0.1.0"
