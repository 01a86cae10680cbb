"""Desk-scale gaze estimation stack.

Compact CNN and CNN+RNN gaze models with a from-scratch inference/training
engine, post-training fp16 quantisation and magnitude pruning, a synthetic
moving-dot dataset generator, the frame preprocessing pipeline, evaluation
statistics, a TCP edge inference service with a cloud-stub model registry,
and a latency/CPU/memory/energy benchmark harness.
"""

__version__ = "0.1.0"
