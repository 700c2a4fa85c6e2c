#!/usr/bin/env python3
"""
Development check script - runs formatting, linting, and tests.

Usage:
    python scripts/check.py           # Run all checks
    python scripts/check.py --fix     # Run all checks and auto-fix issues
    python scripts/check.py --fast    # Skip tests (format + lint only)
    python scripts/check.py --slow    # Include slow sampler-correctness tests
    python scripts/check.py --diagnose  # Also run every `bnpl diagnose` suite
"""

import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).parent.parent
SUITES = ["psi-kappa", "enumerate", "marginal", "lifetime", "stationarity", "geweke"]


def run_command(cmd: list[str], description: str) -> bool:
    """Run a command and return True if successful."""
    print(f"🔍 {description}...")

    try:
        result = subprocess.run(cmd, capture_output=True, text=True, cwd=ROOT)
    except OSError as e:
        print(f"❌ {description} - ERROR: {e}")
        return False

    if result.returncode == 0:
        print(f"✅ {description} - PASSED")
        if result.stdout:
            print(f"   {result.stdout.strip().splitlines()[-1]}")
        return True
    print(f"❌ {description} - FAILED (exit {result.returncode})")
    if result.stdout:
        print(f"   stdout: {result.stdout.strip()}")
    if result.stderr:
        print(f"   stderr: {result.stderr.strip()}")
    return False


def main():
    parser = argparse.ArgumentParser(description="Run development checks")
    parser.add_argument(
        "--fix", action="store_true", help="Auto-fix linting and formatting issues"
    )
    parser.add_argument(
        "--fast", action="store_true", help="Skip tests (format + lint only)"
    )
    parser.add_argument(
        "--slow", action="store_true", help="Include tests marked slow"
    )
    parser.add_argument(
        "--diagnose",
        action="store_true",
        help="Run the oracle suites in quick mode after the tests",
    )
    args = parser.parse_args()

    print("🚀 Running development checks...\n")

    ruff = [sys.executable, "-m", "ruff"]
    steps: list[tuple[list[str], str]] = []
    if args.fix:
        steps.append(([*ruff, "format", "."], "Code formatting (auto-fix)"))
        steps.append(([*ruff, "check", ".", "--fix"], "Linting (auto-fix)"))
    else:
        steps.append(([*ruff, "format", "--check", "."], "Code formatting check"))
        steps.append(([*ruff, "check", "."], "Linting check"))

    if not args.fast:
        pytest = [sys.executable, "-m", "pytest", "--cov=bnpl", "--cov-report=term"]
        if args.slow:
            pytest += ["-m", "slow or not slow"]
        steps.append((pytest, "Test suite with coverage"))

    if args.diagnose:
        bnpl = [sys.executable, "-m", "bnpl.cli"]
        for suite in SUITES:
            steps.append(
                (
                    [*bnpl, "diagnose", "--suite", suite, "--quick"],
                    f"Oracle suite {suite}",
                )
            )

    all_passed = True
    for cmd, description in steps:
        all_passed &= run_command(cmd, description)
        print()

    # Summary
    print("=" * 50)
    if all_passed:
        print("🎉 All checks PASSED! Ready to commit.")
        if args.fast:
            print("💡 Run without --fast to include tests.")
        sys.exit(0)
    else:
        print("💥 Some checks FAILED!")
        if not args.fix:
            print("💡 Try running with --fix to auto-fix formatting/linting issues.")
        sys.exit(1)


if __name__ == "__main__":
    main()
