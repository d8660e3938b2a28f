"""tacseg: frame-wise skill segmentation of multimodal manipulation demonstrations.

Fuses tactile/visual embeddings, force-torque, and TCP pose streams into
per-frame feature vectors, labels them with a temporal model (BiLSTM, TCN, or
transformer encoder), and reconciles overlapping window predictions by soft
voting. Ships a synthetic demonstration generator so the whole pipeline runs
without hardware.
"""

__version__ = "0.1.0"
