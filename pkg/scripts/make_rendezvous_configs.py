"""Regenerate the shipped rendezvous benchmark configuration files.

Writes configs/rendezvous.json (the physical parameters) plus the
system/spec/noise JSON triple the CLI consumes.
"""

from pathlib import Path

from scenreach.rendezvous import (CwhConfig, build_cwh_system,
                                  build_rendezvous_noise,
                                  build_rendezvous_spec, save_cwh_config)
from scenreach.scenarios import save_noise
from scenreach.sets import save_spec
from scenreach.system import save_system


def main() -> None:
    out = Path(__file__).resolve().parent.parent / "configs"
    out.mkdir(exist_ok=True)
    cfg = CwhConfig()
    save_cwh_config(cfg, out / "rendezvous.json")
    save_system(build_cwh_system(cfg), out / "cwh_system.json")
    spec, box = build_rendezvous_spec(cfg)
    save_spec(spec, box, out / "rendezvous_spec.json")
    save_noise(build_rendezvous_noise(cfg), out / "rendezvous_noise.json")
    print(f"wrote configs to {out}")


if __name__ == "__main__":
    main()
