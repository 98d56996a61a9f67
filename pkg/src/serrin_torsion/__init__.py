"""Overdetermined torsion problems on small geodesic balls.

Numerical construction of domains, close to geodesic spheres, whose torsion
potential has constant normal derivative, together with the reduced
shape-energy expansions, foliation certification, and isochoric profile
asymptotics that the construction supports. Everything runs at desk scale on
built-in model manifolds (flat space, round spheres, conformally perturbed
two-spheres).
"""

__version__ = "0.1.0"
