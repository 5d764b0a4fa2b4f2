"""Gradient-informed neural networks: function approximation with learned gradient priors."""
import jax

# derivative nesting amplifies rounding; everything runs in float64
jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"
