"""Structure functions for differential dynamic microscopy.

Two engines compute the same quantity from the spatial spectra of an image
stack: ``with_ft`` (Fourier transform in time) and ``without_ft`` (spectral
differences per lag). ``direct`` transforms every image difference and is
kept as a reference.
"""
__version__ = "0.1.0"

from .errors import DDMError, MergeError, PlanningError, ResultIOError, StackFormatError
from .io import ImageStack, ResultArchive, load_stack, open_stack, read_results, write_results
from .scheduler import analyze, run
from .spectrum import cutoff_set, forward_spectrum
from .temporal import pad_length, with_ft_sequence

__all__ = [
    "DDMError", "MergeError", "PlanningError", "ResultIOError", "StackFormatError",
    "ImageStack", "ResultArchive", "load_stack", "open_stack", "read_results",
    "write_results", "analyze", "run", "cutoff_set", "forward_spectrum", "pad_length",
    "with_ft_sequence",
]
