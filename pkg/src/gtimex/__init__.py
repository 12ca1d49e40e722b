"""IMEX Runge-Kutta state, adjoint and boundary-control solvers for a two-velocity relaxation model."""

__version__ = "0.1.0"
