"""Interactive video annotation toolkit.

Point/box prompts on video frames become per-frame object masks through
pluggable segmentation and propagation backends; tracked sessions export as
YOLO-format training datasets.
"""

from .errors import ToolError
from .mask import MaskMap, PixelBox, YoloBox, mask_iou, mask_to_bbox, render_overlay
from .segmentation import BoxPrompt, ObjectPromptSet, PointPrompt, create_segmenter
from .session import (
    AnnotationSession,
    LabelClass,
    Segment,
    correct_and_resume,
    create_session,
    load_session,
    prompt_frame,
    session_summary,
    track_segment,
)
from .tracking import PropagationRequest, create_tracker
from .video_io import Frame, VideoSource, extract_frames, open_video, write_preview

__version__ = "0.1.0"

__all__ = [
    "AnnotationSession",
    "BoxPrompt",
    "Frame",
    "LabelClass",
    "MaskMap",
    "ObjectPromptSet",
    "PixelBox",
    "PointPrompt",
    "PropagationRequest",
    "Segment",
    "ToolError",
    "VideoSource",
    "YoloBox",
    "correct_and_resume",
    "create_segmenter",
    "create_session",
    "create_tracker",
    "extract_frames",
    "load_session",
    "mask_iou",
    "mask_to_bbox",
    "open_video",
    "prompt_frame",
    "render_overlay",
    "session_summary",
    "track_segment",
    "write_preview",
]
