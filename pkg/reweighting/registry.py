#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Strategy Registry - name-based registration of re-weighting strategies

Strategies register themselves with a decorator under a name and a
category ('macro' for stage weights, 'micro' for spatial weights), and
compose_weights looks them up by the names in the imitation config.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from errors import ConfigError

MACRO = 'macro'
MICRO = 'micro'


@dataclass
class StrategyDefinition:
    """Strategy definition with metadata"""
    name: str
    function: Callable
    description: str
    category: str


class StrategyRegistry:
    """Registry of weighting strategies, keyed by (category, name)"""

    def __init__(self):
        self._strategies: Dict[str, Dict[str, StrategyDefinition]] = {MACRO: {}, MICRO: {}}

    def register(self, name: Optional[str] = None, category: str = MICRO, description: Optional[str] = None):
        """Decorator to register a strategy

        Args:
            name: Strategy name (defaults to function name)
            category: 'macro' or 'micro'
            description: Defaults to the function docstring

        Example:
            @registry.register('none', category='micro')
            def uniform_spatial(pair, boxes, config):
                return np.ones(...)
        """
        if category not in self._strategies:
            raise ConfigError(f"Unknown strategy category '{category}', expected '{MACRO}' or '{MICRO}'")

        def decorator(func: Callable):
            strategy_name = name or func.__name__
            self._strategies[category][strategy_name] = StrategyDefinition(
                name=strategy_name,
                function=func,
                description=description or (func.__doc__ or '').strip(),
                category=category,
            )
            return func

        return decorator

    def get(self, category: str, name: str) -> StrategyDefinition:
        """Look up a strategy

        Raises:
            ConfigError: If no strategy of that name exists in the category
        """
        if not self.has_strategy(category, name):
            available = ', '.join(self.get_strategies_by_category(category))
            raise ConfigError(f"Unknown {category} weighting '{name}'. Available: {available}")
        return self._strategies[category][name]

    def has_strategy(self, category: str, name: str) -> bool:
        return name in self._strategies.get(category, {})

    def get_strategies_by_category(self, category: str) -> List[str]:
        return sorted(self._strategies.get(category, {}))


# Global registry instance
_registry = StrategyRegistry()


def get_registry() -> StrategyRegistry:
    return _registry


def register_strategy(name: Optional[str] = None, category: str = MICRO, description: Optional[str] = None):
    """Convenience decorator for registering strategies on the global registry"""
    return _registry.register(name=name, category=category, description=description)
