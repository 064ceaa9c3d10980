#!/usr/bin/env python3
"""
Verification script to test foveal-iqa installation.
Run after installing the package.
"""

import subprocess
import sys
import tempfile
from pathlib import Path


def test_import():
    """Test 1: Check if package can be imported."""
    print("Test 1: Checking imports...")
    try:
        import foveal_iqa  # noqa: F401
        from foveal_iqa.cli import main  # noqa: F401
        from foveal_iqa.config import Config, load_config  # noqa: F401
        from foveal_iqa.geometry import GEAR_VR, derive_virtual_geometry  # noqa: F401
        from foveal_iqa.scoring import METRICS  # noqa: F401

        print("  ✅ All imports successful")
        return True
    except ImportError as e:
        print(f"  ❌ Import failed: {e}")
        return False


def test_command_exists():
    """Test 2: Check if foveal-iqa command exists."""
    print("\nTest 2: Checking command availability...")
    try:
        result = subprocess.run(
            ["foveal-iqa", "--version"], capture_output=True, text=True, timeout=10
        )
        if result.returncode == 0:
            print(f"  ✅ Command 'foveal-iqa' works ({result.stdout.strip()})")
            return True
        print(f"  ❌ Command failed with code {result.returncode}")
        return False
    except FileNotFoundError:
        print("  ❌ Command 'foveal-iqa' not found")
        print("     Try: pip install -e . or pip install dist/*.whl")
        return False
    except Exception as e:
        print(f"  ❌ Error running command: {e}")
        return False


def test_geometry_command():
    """Test 3: Run the geometry stage for the default headset."""
    print("\nTest 3: Testing the geometry command...")
    with tempfile.TemporaryDirectory() as tmpdir:
        try:
            result = subprocess.run(
                ["foveal-iqa", "geometry", "--out-dir", tmpdir],
                capture_output=True,
                text=True,
                timeout=60,
            )
        except Exception as e:
            print(f"  ❌ Geometry command failed: {e}")
            return False
        if result.returncode != 0:
            print(f"  ❌ Command failed: {result.stderr}")
            return False
        if "41.8919" not in result.stdout or not (Path(tmpdir) / "zones.npy").is_file():
            print("  ❌ Unexpected geometry output")
            return False
    print("  ✅ Geometry report works (S1 = 41.8919 mm)")
    return True


def test_metrics():
    """Test 4: Score a synthetic pair with every built-in metric."""
    print("\nTest 4: Testing metrics...")
    try:
        import numpy as np

        from foveal_iqa.geometry import DisplayGeometry, derive_virtual_geometry
        from foveal_iqa.raster_io import ViewportImage
        from foveal_iqa.scoring import ScoringContext, score_pair

        geometry = derive_virtual_geometry(DisplayGeometry(62.0, 25.0, 10.0, 192, 192, 48.0, 48.0))
        rng = np.random.default_rng(0)
        ref = ViewportImage(rng.integers(20, 235, (192, 192), dtype=np.uint8), geometry=geometry)
        dist = ref.with_data(np.clip(ref.data.astype(int) + 4, 0, 255).astype(np.uint8))
        scores, _ = score_pair(ref, dist, ScoringContext.build(geometry))
        print(f"  ✅ {len(scores)} metrics computed (VPSNR = {scores['VPSNR']:.2f} dB)")
        return True
    except Exception as e:
        print(f"  ❌ Metric test failed: {e}")
        return False


def test_config_loading():
    """Test 5: Test config file loading."""
    print("\nTest 5: Testing config loading...")
    try:
        from foveal_iqa.config import Config, load_config

        config = load_config(None)
        if isinstance(config, Config):
            print(f"  ✅ Config loads: seed={config.seed}, jobs={config.jobs}")
            return True
        print("  ❌ Config is not a Config object")
        return False
    except Exception as e:
        print(f"  ❌ Config loading failed: {e}")
        return False


def main():
    """Run all verification tests."""
    print("=" * 60)
    print("foveal-iqa - Installation Verification")
    print("=" * 60)

    tests = [
        test_import,
        test_command_exists,
        test_geometry_command,
        test_metrics,
        test_config_loading,
    ]

    results = []
    for test in tests:
        try:
            results.append(test())
        except Exception as e:
            print(f"\n  ❌ Test crashed: {e}")
            results.append(False)

    print("\n" + "=" * 60)
    print("RESULTS")
    print("=" * 60)
    passed = sum(results)
    total = len(results)
    print(f"  Passed: {passed}/{total}")
    print(f"  Failed: {total - passed}/{total}")

    if all(results):
        print("\n🎉 All checks passed! Installation is working correctly.")
        print("=" * 60)
        return 0
    print("\n⚠️  Some checks failed. Please check the output above.")
    print("=" * 60)
    return 1


if __name__ == "__main__":
    sys.exit(main())
