# scripts/validate_records.py
import argparse, sys

from ghost_interference.records import validate_file

def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("records_file", help="Path to duality JSONL file")
    args = ap.parse_args()

    errors = validate_file(args.records_file)
    for msg in errors:
        print(msg)
    if not errors:
        print(f"[OK] {args.records_file} passed schema validation")
        return 0
    print(f"[FAIL] {len(errors)} issue(s) in {args.records_file}")
    return 1

if __name__ == "__main__":
    sys.exit(main())
