"""
Test package for inbetween

Unit tests for the autodiff core, warping, the model, training, datasets,
checkpoints, inference and the command line.
"""
