"""
Standalone runner shared by the test scripts

Each tests/test_*.py keeps a main() so it can run without pytest:
    python tests/test_meshgen.py
"""

import sys
import traceback
from pathlib import Path

SRC_DIR = Path(__file__).parent.parent / "src"
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))


def run_suite(title, tests):
    """Run test functions in order, print a summary, return an exit code"""
    print("\n" + "=" * 70)
    print(title)
    print("=" * 70)

    results = []
    for test in tests:
        print(f"\n--- {test.__name__} ---")
        try:
            test()
            results.append(True)
        except Exception as e:
            print(f"[ERROR] {test.__name__}: {type(e).__name__}: {e}")
            traceback.print_exc()
            results.append(False)

    print("\n" + "=" * 70)
    print("TEST SUMMARY")
    print("=" * 70)
    passed = sum(results)
    print(f"Passed: {passed}/{len(results)}")
    if passed == len(results):
        print("\n[OK] ALL TESTS PASSED")
        return 0
    print("\n[FAIL] SOME TESTS FAILED")
    return 1
