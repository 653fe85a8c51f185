#!/usr/bin/env python3
"""
Test runner for the lyrics recognition toolkit.

Runs the whole suite, one category, a single test, or the suite with
coverage. The slow end-to-end training runs are skipped unless asked for.
"""

import argparse
import shutil
import subprocess
import sys
from pathlib import Path
from typing import List


class TestRunner:
    """Builds and runs pytest commands for the toolkit."""

    __test__ = False

    def __init__(self):
        self.project_root = Path(__file__).parent.parent
        self.tests_dir = self.project_root / "tests"

        self.test_categories = {
            "data": ["test_corpus.py", "test_features.py"],
            "models": ["test_models.py", "test_lm.py", "test_training.py"],
            "decoding": ["test_decoding.py"],
            "evaluation": ["test_metrics.py", "test_experiments.py"],
            "cli": ["test_cli.py"],
        }

    def check_dependencies(self) -> bool:
        """Check that the testing packages are importable."""
        missing = []
        for package in ["pytest", "pytest_cov", "pytest_mock", "editdistance"]:
            try:
                __import__(package)
            except ImportError:
                missing.append(package)
        if missing:
            print(f"❌ Missing required packages: {', '.join(missing)}")
            print("Install them with: pip install -r requirements.txt")
            return False
        print("✅ All required packages are installed")
        return True

    def run_command(self, command: List[str]) -> subprocess.CompletedProcess:
        print(f"Running: {' '.join(command)}")
        return subprocess.run(command, cwd=self.project_root, text=True, check=False)

    def _pytest(self, verbose: bool, slow: bool) -> List[str]:
        command = [sys.executable, "-m", "pytest"]
        if verbose:
            command.append("-v")
        if not slow:
            command.extend(["-m", "not slow"])
        return command

    def run_all_tests(self, verbose: bool = False, slow: bool = False) -> bool:
        """Run every test file."""
        print("🚀 Running all tests...")
        result = self.run_command(self._pytest(verbose, slow) + ["tests/"])
        print("✅ All tests passed!" if result.returncode == 0 else "❌ Some tests failed!")
        return result.returncode == 0

    def run_category_tests(self, category: str, verbose: bool = False, slow: bool = False) -> bool:
        """Run the files of one category."""
        if category not in self.test_categories:
            print(f"❌ Unknown test category: {category}")
            print(f"Available categories: {', '.join(self.test_categories)}")
            return False
        print(f"🧪 Running {category} tests...")
        files = [str(self.tests_dir / name) for name in self.test_categories[category]
                 if (self.tests_dir / name).exists()]
        result = self.run_command(self._pytest(verbose, slow) + files)
        print(f"✅ {category} tests passed!" if result.returncode == 0 else f"❌ {category} tests failed!")
        return result.returncode == 0

    def run_specific_test(self, test_path: str, verbose: bool = False) -> bool:
        """Run one test file or node id (slow tests included)."""
        print(f"🎯 Running specific test: {test_path}")
        result = self.run_command(self._pytest(verbose, slow=True) + [test_path])
        return result.returncode == 0

    def run_with_coverage(self, verbose: bool = False, slow: bool = False) -> bool:
        """Run the suite with coverage of both packages."""
        print("📊 Running tests with coverage...")
        command = self._pytest(verbose, slow) + [
            "--cov=lyrics_asr",
            "--cov=evaluation",
            "--cov-report=html",
            "--cov-report=term-missing",
            "tests/",
        ]
        result = self.run_command(command)
        if result.returncode == 0:
            print("📊 Coverage report generated in htmlcov/")
        return result.returncode == 0

    def clean_test_artifacts(self) -> None:
        """Remove caches and coverage output."""
        print("🧹 Cleaning up test artifacts...")
        for artifact in [".pytest_cache", "htmlcov", "coverage.xml", "__pycache__"]:
            path = self.project_root / artifact
            if path.is_file():
                path.unlink()
            elif path.exists():
                shutil.rmtree(path)
            else:
                continue
            print(f"   Removed: {artifact}")

    def show_test_summary(self) -> None:
        print("\n📚 Test Summary")
        print("=" * 50)
        for category, files in self.test_categories.items():
            print(f"\n{category.upper()} Tests:")
            for name in files:
                status = "✅" if (self.tests_dir / name).exists() else "❌"
                print(f"  {status} {name}")


def main():
    """Main entry point for the test runner."""
    parser = argparse.ArgumentParser(
        description="Lyrics recognition toolkit test runner",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Fast suite
  python tests/test_runner.py

  # Include the end-to-end training runs
  python tests/test_runner.py --slow

  # One category, with coverage
  python tests/test_runner.py --category decoding
  python tests/test_runner.py --coverage
        """,
    )
    parser.add_argument("--category", choices=["data", "models", "decoding", "evaluation", "cli"],
                        help="Run tests for a specific category")
    parser.add_argument("--test", help="Run a specific test file or test function")
    parser.add_argument("--coverage", action="store_true", help="Run tests with coverage reporting")
    parser.add_argument("--slow", action="store_true", help="Include tests marked slow")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    parser.add_argument("--clean", action="store_true", help="Clean up test artifacts after running")
    parser.add_argument("--summary", action="store_true", help="Show test summary and exit")
    args = parser.parse_args()

    runner = TestRunner()
    if args.summary:
        runner.show_test_summary()
        return
    if not runner.check_dependencies():
        sys.exit(1)

    if args.test:
        success = runner.run_specific_test(args.test, args.verbose)
    elif args.category:
        success = runner.run_category_tests(args.category, args.verbose, args.slow)
    elif args.coverage:
        success = runner.run_with_coverage(args.verbose, args.slow)
    else:
        success = runner.run_all_tests(args.verbose, args.slow)

    if args.clean:
        runner.clean_test_artifacts()
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
