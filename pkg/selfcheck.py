#!/usr/bin/env python3
"""
Setup and self-check script for the Killing Geometry Toolkit
"""

import logging
import sys

import numpy as np


def check_dependencies():
    """Check if all required packages are installed"""
    print("Checking dependencies...")

    required = ['numpy', 'scipy', 'pandas', 'sympy', 'yaml', 'pytest']

    missing = []
    for package in required:
        try:
            __import__(package)
            print(f"  ✓ {package}")
        except ImportError:
            print(f"  ✗ {package} - MISSING")
            missing.append(package)

    if missing:
        print(f"\nMissing packages: {', '.join(missing)}")
        print("\nInstall with: pip install -r requirements.txt")
        return False

    print("\n✓ All dependencies installed!")
    return True


def create_directories():
    """Create necessary directory structure"""
    print("\nCreating directory structure...")

    from config import DATA_DIR, OUTPUT_DIR, LOGS_DIR

    for directory in [DATA_DIR, OUTPUT_DIR, LOGS_DIR]:
        print(f"  ✓ {directory}")

    print("\n✓ Directory structure created!")


def _check(label, value, expected, tolerance):
    ok = abs(value - expected) <= tolerance
    mark = "✓" if ok else "✗"
    print(f"  {mark} {label}: {value:.12g} (expected {expected:.12g})")
    return ok


def run_demo():
    """Run quick numerical checks on the standard models"""
    print("\n" + "=" * 60)
    print("RUNNING SELF-CHECK")
    print("=" * 60)

    from holonomy import BaseCurve, holonomy_displacement
    from homogeneous_spaces import QuotientSpec, nil3_quotient_holonomy, semidirect_tau_mu
    from killing_model import KillingModel, bundle_curvature_check
    from minimal_solver import solve_minimal_torus
    from scalar_fields import Domain2D

    results = []

    print("\n1. Heisenberg space over the disk...")
    heisenberg = KillingModel(Domain2D("disk", 33, 33, radius=2.0), 1, 1, 1)
    results.append(_check("bundle curvature at (0.3, -0.2)",
                          bundle_curvature_check(heisenberg, (0.3, -0.2)), 1.0, 1e-9))
    d = holonomy_displacement(heisenberg, BaseCurve.circle((0.0, 0.0), 1.0))
    results.append(_check("holonomy of the unit circle", d, 2 * np.pi, 1e-6))

    print("\n2. Minimal graph over a sinusoidal torus...")
    torus = KillingModel(Domain2D("torus", 24, 24, bounds=(0, 1, 0, 1)),
                         1, "sin(2*pi*x)*sin(2*pi*y)", 1)
    report = solve_minimal_torus(torus)
    print(f"  iterations: {report.iterations}, residual: {report.residual:.3e}")
    results.append(report.converged)

    print("\n3. Homogeneous examples...")
    two_tau_over_mu, mu = semidirect_tau_mu([[0, 1], [0, 0]], 0.7)
    results.append(_check("Heisenberg tau", 0.5 * two_tau_over_mu * mu, 0.5, 1e-12))
    quotient = nil3_quotient_holonomy(QuotientSpec(1.0, 0.0, 0.0))
    results.append(_check("commutator shift", quotient.commutator_shift, 2.0, 0.0))

    print("\n" + "=" * 60)
    if all(results):
        print("SELF-CHECK PASSED")
    else:
        print("SELF-CHECK FAILED")
    print("=" * 60)
    print("\nNext steps:")
    print("  python main.py --config configs/heisenberg_disk.yaml model-info")
    print("  python main.py --config configs/sinusoidal_torus.yaml solve-minimal --out data/output/u.csv")
    return all(results)


def main():
    """Main setup function"""
    logging.basicConfig(level=logging.WARNING,
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    print("\n" + "=" * 60)
    print("KILLING GEOMETRY TOOLKIT - SETUP & SELF-CHECK")
    print("=" * 60)

    if not check_dependencies():
        print("\n⚠ Please install missing dependencies first")
        sys.exit(1)

    create_directories()

    if not run_demo():
        sys.exit(1)


if __name__ == "__main__":
    main()
