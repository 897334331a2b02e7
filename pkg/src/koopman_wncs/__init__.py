"""Deep-Koopman control and Lyapunov-scheduled communication for wireless
networked control systems.

Subpackages map to the building blocks of the closed loop: plant models
(`dynamics`), Rician link statistics (`channel`), minimal neural-net kernels
(`nn`), the Koopman embedding model (`koopman`), embedding-space LQR
(`control`), the prediction-error surrogate (`errmodel`), drift-plus-penalty
sensor scheduling (`scheduler`), and the episode/sweep harness (`harness`).
"""

__version__ = "0.1.0"
