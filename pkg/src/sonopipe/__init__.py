"""Ultrasound-driven gesture recognition and prosthetic hand streaming.

The package turns forearm ultrasound frames into gesture classes via
pixel-correlation features and k-NN, maps gestures to 14-joint hand
poses, and streams NDJSON pose messages over TCP and WebSocket.
"""

from .classifier import (
    ConfusionMatrix,
    CvReport,
    KnnModel,
    LabeledSample,
    ModelError,
    aggregate_confusion,
    cross_validate,
    exclude_class,
    knn_fit,
    knn_predict,
    load_model,
    save_model,
    stratified_folds,
)
from .features import (
    CorrelationVector,
    TemplateMatcher,
    ZeroVarianceError,
    argmax_classify,
    extract_features,
    pearson,
)
from .frame import (
    Frame,
    FrameError,
    PgmFormatError,
    Roi,
    crop,
    load_pgm,
    resize,
    save_pgm,
    to_grayscale,
)
from .gestures import ALL_GESTURES, GestureLabel
from .kinematics import (
    JOINT_NAMES,
    N_JOINTS,
    JointLimits,
    JointState,
    PoseConfigError,
    PosePreset,
    interpolate,
    load_presets,
    pose_for,
    trajectory,
    validate_limits,
)
from .pipeline import (
    CommandServer,
    ConfigError,
    Debouncer,
    DropOldestQueue,
    Metrics,
    PipelineConfig,
    PipelineEngine,
    evaluate_samples,
    train_from_frames,
)
from .rng import Stream
from .sources import (
    DirectoryReplaySource,
    FrameSource,
    SourceError,
    SyntheticSource,
    TcpFrameSource,
    encode_frame_wire,
)
from .streamwire import (
    PoseMessage,
    StreamServer,
    TcpSubscriber,
    WireError,
    WsSubscriber,
    decode_message,
    encode_message,
)
from .synth import (
    GestureDeformation,
    PhantomError,
    PhantomSpec,
    default_deformations,
    generate_dataset,
    load_dataset,
    make_phantom,
    render_gesture,
)
from .templates import (
    GestureTemplate,
    TemplateStore,
    TemplateStoreError,
    build_template,
    load_store,
    mean_image,
    save_store,
    select_stable_frames,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
