from .config import get_config, load_config, set_config

__all__ = ['get_config', 'load_config', 'set_config']
