#!/usr/bin/env python3
"""
Test runner script for the gsgw toolkit
Usage: python run_tests.py [--fast]
"""
import subprocess
import sys

def run_tests(fast: bool = False):
    """Run all tests with pytest; --fast skips tests marked slow"""
    command = [
        sys.executable, "-m", "pytest",
        "tests/",
        "-v",
        "--tb=short",
        "--disable-warnings",
    ]
    if fast:
        command += ["-m", "not slow"]
    try:
        subprocess.run(command, check=True)

        print("\n✅ All tests passed!")
        return True

    except subprocess.CalledProcessError as e:
        print(f"\n❌ Tests failed with exit code {e.returncode}")
        return False
    except FileNotFoundError:
        print("❌ pytest not found. Install with: pip install -r requirements.txt")
        return False

if __name__ == "__main__":
    success = run_tests(fast="--fast" in sys.argv[1:])
    sys.exit(0 if success else 1)
