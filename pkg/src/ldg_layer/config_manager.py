#!/usr/bin/env python3
"""
Configuration Manager for ldg-layer

Provides centralized configuration management with:
- YAML config file loading (deep-merged over built-in defaults)
- Environment variable override of the config path
- Typed getters for study, solver, output and logging settings
- User-friendly error messages

Usage:
    from ldg_layer.config_manager import ConfigManager

    # Load configuration
    config = ConfigManager()

    # Access settings
    quad = config.get_quad_points()
    floor = config.get('study.epsilon_floor')
"""

import copy
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Dict, Any

import yaml

# Built-in defaults; mirrors config/config.default.yaml
DEFAULTS: Dict[str, Any] = {
    "version": "1.0",
    "study": {
        "sigma_offset": 2.0,
        "lambda1": 0.0,
        "lambda2": 0.0,
        "quad_points": 5,
        "epsilon_floor": 1e-10,
        "robust_tolerance": 1.05,
    },
    "solver": {
        "ordering": "COLAMD",
        "refine_steps": 1,
        "pivot_threshold": 1e-14,
        "residual_tolerance": 1e-9,
        "max_monolithic_dofs": 7077888,
        "max_factor_memory_mb": 4096.0,
        "condense": False,
    },
    "output": {
        "dir": "output",
        "format": "csv",
    },
    "logging": {
        "enabled": True,
        "level": "INFO",
        "log_dir": "logs",
        "log_to_file": False,
        "log_format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    },
    "advanced": {
        "parallel_processing": False,
        "max_workers": 4,
    },
}

ENV_CONFIG_PATH = "LDG_LAYER_CONFIG"


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigManager:
    """Centralized configuration manager"""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize configuration manager

        Args:
            config_path: Path to config.yaml (default: auto-detect)
        """
        self.project_root = self._find_project_root()
        self.config_path = self._resolve_config_path(config_path)
        self.config = self._load_config()

    def _find_project_root(self) -> Path:
        """Find project root directory

        Searches for a directory holding both config/ and requirements.txt.

        Returns:
            Path to project root
        """
        current = Path(__file__).resolve().parent

        # Search up to 3 levels
        for _ in range(3):
            if (current / 'config').exists() and (current / 'requirements.txt').exists():
                return current
            current = current.parent

        # Fallback: parent of src/
        return Path(__file__).resolve().parent.parent.parent

    def _resolve_config_path(self, config_path: Optional[str]) -> Optional[Path]:
        """Resolve config file path

        Search order:
        1. Explicit config_path parameter
        2. Environment variable LDG_LAYER_CONFIG
        3. config.yaml in project root
        4. config/config.default.yaml
        5. None (built-in defaults only)

        Args:
            config_path: Optional explicit path

        Returns:
            Path to config file, or None
        """
        if config_path:
            path = Path(config_path)
            if path.exists():
                return path
            raise FileNotFoundError(f"[ERROR] Config file not found: {config_path}")

        env_path = os.environ.get(ENV_CONFIG_PATH)
        if env_path:
            path = Path(env_path)
            if path.exists():
                return path
            raise FileNotFoundError(
                f"[ERROR] Config file from {ENV_CONFIG_PATH} not found: {env_path}"
            )

        root_config = self.project_root / 'config.yaml'
        if root_config.exists():
            return root_config

        default_config = self.project_root / 'config' / 'config.default.yaml'
        if default_config.exists():
            return default_config

        return None

    def _load_config(self) -> Dict[str, Any]:
        """Load YAML configuration file merged over DEFAULTS

        Returns:
            Configuration dictionary
        """
        if self.config_path is None:
            return copy.deepcopy(DEFAULTS)

        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ValueError(f"[ERROR] Invalid YAML syntax in {self.config_path}: {e}")
        except OSError as e:
            raise RuntimeError(f"[ERROR] Failed to load config file {self.config_path}: {e}")

        if loaded is None:
            return copy.deepcopy(DEFAULTS)
        if not isinstance(loaded, dict):
            raise ValueError(
                f"[ERROR] Config file {self.config_path} must contain a mapping at top level"
            )
        return _deep_merge(DEFAULTS, loaded)

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by dot-notation key

        Args:
            key: Dot-notation key (e.g., 'solver.refine_steps')
            default: Default value if key not found

        Returns:
            Configuration value

        Example:
            >>> config.get('study.quad_points')
            5
        """
        value = self.config
        for k in key.split('.'):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    # ----- study -----

    def get_sigma_offset(self) -> float:
        """sigma = k + offset (default offset 2)"""
        return float(self.get('study.sigma_offset', 2.0))

    def get_lambdas(self):
        """Outflow penalty weights (lambda1, lambda2)"""
        return float(self.get('study.lambda1', 0.0)), float(self.get('study.lambda2', 0.0))

    def get_quad_points(self) -> int:
        """Gauss points per direction for assembly"""
        return int(self.get('study.quad_points', 5))

    def get_epsilon_floor(self) -> float:
        return float(self.get('study.epsilon_floor', 1e-10))

    def get_robust_tolerance(self) -> float:
        return float(self.get('study.robust_tolerance', 1.05))

    # ----- solver -----

    def get_solver_options(self) -> Dict[str, Any]:
        """Solver settings as keyword arguments for linear_solver.factorize"""
        return {
            'ordering': str(self.get('solver.ordering', 'COLAMD')),
            'pivot_threshold': float(self.get('solver.pivot_threshold', 1e-14)),
            'refine_steps': int(self.get('solver.refine_steps', 1)),
        }

    def get_residual_tolerance(self) -> float:
        return float(self.get('solver.residual_tolerance', 1e-9))

    def get_max_monolithic_dofs(self) -> int:
        return int(self.get('solver.max_monolithic_dofs', 7077888))

    def get_max_factor_memory_mb(self) -> float:
        """Budget for the estimated LU factors of a monolithic solve"""
        return float(self.get('solver.max_factor_memory_mb', 4096.0))

    def get_condense(self) -> bool:
        return bool(self.get('solver.condense', False))

    # ----- output / parallelism -----

    def get_output_dir(self) -> Path:
        """Get output directory path

        Returns:
            Absolute path to output directory
        """
        path = Path(self.get('output.dir', 'output'))
        if not path.is_absolute():
            path = self.project_root / path
        return path

    def get_log_dir(self) -> Path:
        path = Path(self.get('logging.log_dir', 'logs'))
        if not path.is_absolute():
            path = self.project_root / path
        return path

    def get_max_workers(self) -> int:
        """Worker cap for concurrent rows (1 when parallel processing is disabled)"""
        if not self.get('advanced.parallel_processing', False):
            return 1
        return max(1, int(self.get('advanced.max_workers', 4)))

    def configure_logging(self, verbose: bool = False) -> None:
        """Configure the root logger from the logging section"""
        if not self.get('logging.enabled', True):
            logging.disable(logging.CRITICAL)
            return
        level_name = 'DEBUG' if verbose else str(self.get('logging.level', 'INFO')).upper()
        level = getattr(logging, level_name, logging.INFO)
        handlers = [logging.StreamHandler(sys.stderr)]
        if self.get('logging.log_to_file', False):
            log_dir = self.get_log_dir()
            log_dir.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.FileHandler(log_dir / 'ldg_layer.log', encoding='utf-8'))
        logging.basicConfig(
            level=level,
            format=self.get('logging.log_format', DEFAULTS['logging']['log_format']),
            handlers=handlers,
            force=True,
        )

    def ensure_directories(self):
        """Ensure output (and, when file logging is on, log) directories exist"""
        dirs_to_create = [self.get_output_dir()]
        if self.get('logging.enabled', True) and self.get('logging.log_to_file', False):
            dirs_to_create.append(self.get_log_dir())
        for directory in dirs_to_create:
            directory.mkdir(parents=True, exist_ok=True)

    def print_summary(self):
        """Print configuration summary"""
        print("=" * 70)
        print("CONFIGURATION SUMMARY")
        print("=" * 70)
        print(f"Config file: {self.config_path or '(built-in defaults)'}")
        print(f"Project root: {self.project_root}")
        print()
        print("Study:")
        print(f"  sigma = k + {self.get_sigma_offset()}")
        print(f"  lambda1, lambda2: {self.get_lambdas()}")
        print(f"  Quadrature points: {self.get_quad_points()}")
        print(f"  Epsilon floor: {self.get_epsilon_floor():g}")
        print()
        print("Solver:")
        for key, value in self.get_solver_options().items():
            print(f"  {key}: {value}")
        print(f"  Residual tolerance: {self.get_residual_tolerance():g}")
        print(f"  Monolithic limits: {self.get_max_monolithic_dofs()} unknowns, "
              f"{self.get_max_factor_memory_mb():g} MB of LU factors")
        print(f"  Condense P/Q: {self.get_condense()}")
        print()
        print(f"Output dir: {self.get_output_dir()}")
        print(f"Max workers: {self.get_max_workers()}")
        print("=" * 70)

