from .mei import check_mei_structure, export_mei
from .rhythm import (EngraveError, Rest, TiedPart, Value, bar_beats, beam_groups, beat_grid,
                     beat_structure, decompose_rest, displayable_values, fewest_values,
                     infill_rests, rest_allowed, split_ties)
from .streams import Layer, MeasureLayout, VoiceStream, derive_voice_streams, layout, to_annotated
from .viz import export_viz, viz_document

__all__ = [
    "check_mei_structure", "export_mei", "EngraveError", "Rest", "TiedPart", "Value",
    "bar_beats", "beam_groups", "beat_grid", "beat_structure", "decompose_rest",
    "displayable_values", "fewest_values", "infill_rests", "rest_allowed", "split_ties",
    "Layer", "MeasureLayout", "VoiceStream", "derive_voice_streams", "layout", "to_annotated",
    "export_viz", "viz_document",
]
