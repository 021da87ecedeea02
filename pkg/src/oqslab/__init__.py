"""oqslab: reduced dynamics of bilinearly coupled pairs.

Truncated-space operators (hilbert), the two inequivalent second-order
master equations for a pair of bilinearly coupled particles (toymodel),
exact references for both (oracle), vacuum radiation-reaction kernels and
their regularized distributional limits (kernels), the trapped-charge
master equation and its moment flow (brem), and a declarative scenario
runner (scenarios, cli).
"""

__version__ = "0.1.0"
