import json
import logging
from datetime import datetime
from typing import Optional, Dict
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.panel import Panel
from rich.table import Table
from rich.theme import Theme
from rich.text import Text
from rich.logging import RichHandler
from rich import box

from src.experiments.records import CampaignSummary

logger = logging.getLogger(__name__)

lab_theme = Theme({
    "warning": "yellow",
    "error": "bold red",
    "success": "bold green",
    "highlight": "magenta",
    "logger_name": "bright_blue",
    "message": "bright_white",
    "level.debug": "dim cyan",
    "level.info": "bright_green",
    "level.warning": "bright_yellow",
    "level.error": "bold red",
    "level.critical": "bold red reverse",
})


class RichLogHandler(RichHandler):
    """Stderr handler printing ``[LEVEL] logger: message``."""

    def __init__(self, console: Optional[Console] = None, **kwargs):
        super().__init__(
            console=console or Console(theme=lab_theme, stderr=True),
            rich_tracebacks=True,
            show_time=False,
            show_level=False,
            show_path=False,
            **kwargs
        )

    def render(
        self,
        record: logging.LogRecord,
        traceback=None,
        message_renderable: Optional[Text] = None
    ) -> Text:
        """
        Build the log line; a traceback, if any, follows on the next line.

        Args:
            record: The LogRecord instance
            traceback: Rendered traceback, if any
            message_renderable: Pre-rendered message

        Returns:
            Text: the styled line
        """
        line = Text.assemble(
            (f"[{record.levelname}]", f"level.{record.levelname.lower()}"),
            " ",
            (f"{record.name}: ", "logger_name"),
        )
        line.append(message_renderable or Text(record.getMessage(), style="message"))
        if traceback:
            line.append(f"\n{traceback}")
        return line


class CLIView:
    """Console output for the lab: panels, JSON reports and campaign tables."""

    def __init__(self, level: str = "INFO", log_file: str | None = None):
        # reports go to stdout, logs and notices to stderr, so piped JSON stays clean
        self.console = Console(theme=lab_theme)
        self.log_console = Console(theme=lab_theme, stderr=True)
        self.active_spinner: Optional[Progress] = None
        self._setup_logging(level, log_file)

    def _setup_logging(self, level: str, log_file: str | None):
        """Configure the root logger with the Rich handler and an optional file."""
        rich_handler = RichLogHandler(console=self.log_console)
        rich_handler.setLevel(level)

        root_logger = logging.getLogger()
        root_logger.setLevel(logging.DEBUG if log_file else level)
        for handler in root_logger.handlers[:]:
            root_logger.removeHandler(handler)
        root_logger.addHandler(rich_handler)

        if log_file:
            file_handler = logging.FileHandler(log_file)
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(logging.Formatter(
                '%(asctime)s\t[%(levelname)s] %(name)s: %(message)s', '%H:%M:%S'))
            root_logger.addHandler(file_handler)

    def display_message(self, message: str):
        self.log_console.print(Panel(Text(message), box=box.ROUNDED, border_style="bright_blue"))

    def display_error(self, error: str):
        logger.debug("Reporting error: %s", error)
        panel = Panel(
            Text(error, style="error"),
            title="[red]ERROR[/red]",
            border_style="red",
            box=box.HEAVY
        )
        self.log_console.print(panel)

    def display_json(self, payload: Dict | str):
        """Print a report as plain JSON on stdout."""
        text = payload if isinstance(payload, str) else json.dumps(payload, indent=2, sort_keys=True)
        self.console.print_json(text)

    def display_text(self, text: str):
        self.console.out(text, end="", highlight=False)

    def display_summary(self, summary: CampaignSummary):
        table = Table(title=f"{summary.name} ({summary.experiment})", box=box.SIMPLE_HEAVY)
        table.add_column("quantity", style="highlight")
        table.add_column("min", justify="right")
        table.add_column("median", justify="right")
        table.add_column("max", justify="right")
        for name, aggregate in summary.aggregates.items():
            table.add_row(name, f"{aggregate.min:.6g}", f"{aggregate.median:.6g}",
                          f"{aggregate.max:.6g}")
        self.console.print(table)

        low, high = summary.wilson_interval_95
        verdict = {None: "", True: "  acceptance: PASS", False: "  acceptance: FAIL"}[summary.acceptance]
        style = "error" if summary.acceptance is False else "success"
        self.console.print(Text(
            f"passed {summary.pass_count}/{summary.trial_count} "
            f"(Wilson 95% [{low:.4f}, {high:.4f}]) in {summary.wall_time:.1f}s{verdict}",
            style=style))
        for tag, count in summary.error_tags.items():
            self.console.print(Text(f"  {count} trial(s) failed with {tag}", style="warning"))

    def start_progress(self, message: str = "Running"):
        progress = Progress(
            SpinnerColumn(style="bright_cyan"),
            TextColumn("[bright_cyan]{task.description}"),
            console=self.log_console,
            transient=True
        )
        progress.add_task(description=f"{message} ({datetime.now():%H:%M:%S})...", total=None)
        progress.start()
        self.active_spinner = progress

    def stop_progress(self):
        if self.active_spinner:
            self.active_spinner.stop()
            self.active_spinner = None
