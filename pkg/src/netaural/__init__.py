"""Network auralization: node waveforms from graph impulse responses, and
centrality learning from those waveforms with a 1D convolutional regressor."""

__version__ = "0.1.0"
