"""
Трасса построения: упорядоченный журнал этапов конструкций
(какой этап, какой случай доказательства, масштаб, пороги, достигнутые величины).
Прикладывается к отчётам и к исключениям ConstructionError.
"""

from typing import Any, Dict, List, Optional
from utils.logger import log_stage


class ConstructionTrace:
    """
    Журнал этапов одной конструкции.

    Attributes:
        entries: Записи в порядке добавления
    """

    def __init__(self):
        self.entries: List[Dict[str, Any]] = []

    def record(
        self,
        stage: str,
        case: Optional[str] = None,
        scale: Optional[float] = None,
        thresholds: Optional[Dict[str, float]] = None,
        achieved: Optional[Dict[str, Any]] = None,
        note: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Добавляет запись и дублирует её в лог.

        Args:
            stage: Имя этапа
            case: Ветвь доказательства ("case1", "case2", ...)
            scale: Рабочий масштаб этапа (в единицах длины)
            thresholds: Пороговые значения этапа
            achieved: Достигнутые значения (σ, λ, η, ...)
            note: Свободный комментарий (например, о срабатывании порога разрешения)

        Returns:
            dict: Добавленная запись
        """
        entry = {
            "stage": stage,
            "case": case,
            "scale": None if scale is None else float(scale),
            "thresholds": {k: float(v) for k, v in (thresholds or {}).items()},
            "achieved": dict(achieved or {}),
        }
        if note:
            entry["note"] = note
        self.entries.append(entry)
        log_stage(stage, case=case, scale=scale, note=note)
        return entry

    def extend(self, other: "ConstructionTrace") -> None:
        """Добавляет записи другой трассы (вложенная конструкция)."""
        self.entries.extend(other.entries)

    def notes(self) -> List[str]:
        """Все комментарии трассы."""
        return [entry["note"] for entry in self.entries if entry.get("note")]

    def to_list(self) -> List[Dict[str, Any]]:
        """Копия записей для сериализации."""
        return [dict(entry) for entry in self.entries]
