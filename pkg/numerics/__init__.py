# Numerical kernels for directional convection-diffusion stabilization
