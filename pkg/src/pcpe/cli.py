import functools
import json
import sys
from pathlib import Path
from typing import Annotated, Optional

import click
import questionary
import typer
from questionary import Style
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .config import load_settings
from .exceptions import PCPEError
from .logging_config import configure_logging
from .models import DigitalObject, DisseminationResult, GroupPolicy, InlinePolicy
from .models import Principal, Receipt, Session
from .models.interface import interface_from_dict
from .models.mechanism import mechanism_from_dict
from .objects import DisseminatorDescriptor, object_from_dict
from .services import Services, build_services
from .weaver import PolicyViolation
from .wire import error_kind, error_to_wire, to_wire, violation_to_wire

EXIT_OK = 0
EXIT_FAULT = 1
EXIT_DENIED = 2
EXIT_USAGE = 64

AZUL = "#4f8fd6"
DORADO = "#c99a2e"

custom_style = Style(
    [
        ("qmark", f"fg:{AZUL} bold"),
        ("question", "fg:white bold"),
        ("answer", f"fg:{DORADO} bold"),
        ("pointer", f"fg:{AZUL} bold"),
        ("highlighted", f"fg:{AZUL} bold"),
        ("selected", f"fg:{DORADO} bold"),
        ("separator", f"fg:{AZUL}"),
        ("instruction", "fg:gray"),
        ("text", "fg:white"),
        ("disabled", "fg:gray italic"),
    ]
)

console = Console()
err_console = Console(stderr=True)

app = typer.Typer(help="pcpe - repositorio de objetos digitales con políticas propias")
object_app = typer.Typer(help="Consulta de objetos digitales.")
policy_app = typer.Typer(help="Política por defecto, de grupo y asociaciones.")
group_app = typer.Typer(help="Políticas de grupo.")
session_app = typer.Typer(help="Estado de sesiones.")
registry_app = typer.Typer(help="Registro de interfaces y mecanismos.")
app.add_typer(object_app, name="object")
app.add_typer(policy_app, name="policy")
policy_app.add_typer(group_app, name="group")
app.add_typer(session_app, name="session")
app.add_typer(registry_app, name="registry")

RootOption = Annotated[
    Optional[Path],
    typer.Option("--root", help="Raíz del repositorio (sobrescribe PCPE_ROOT)."),
]
JsonOption = Annotated[
    bool, typer.Option("--json", help="Salida JSON legible por programas.")
]
ArgOption = Annotated[
    Optional[list[str]], typer.Option("--arg", help="Argumento NOMBRE=VALOR.")
]
CredentialOption = Annotated[
    Optional[list[str]], typer.Option("--credential", help="Credencial presentada.")
]
ReceiptOption = Annotated[
    Optional[list[str]],
    typer.Option("--receipt", help="Recibo NOMBRE=CENTAVOS presentado."),
]
PrincipalOption = Annotated[
    str, typer.Option("--principal", help="Nombre del solicitante.")
]
SessionOption = Annotated[str, typer.Option("--session", help="ID de sesión.")]


def _services(root: Path | None) -> Services:
    settings = load_settings().with_root(root)
    configure_logging(settings.log_level)
    return build_services(settings)


def _report_error(error: Exception, as_json: bool) -> None:
    if as_json:
        typer.echo(json.dumps({"ok": False, "error": error_to_wire(error)}))
    else:
        err_console.print(Panel(str(error), title=error_kind(error), style="bold red"))


def maneja_errores(func):
    """Convierte errores del repositorio en salida con código 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (PCPEError, OSError, ValueError) as e:
            _report_error(e, kwargs.get("as_json", False))
            raise typer.Exit(EXIT_FAULT) from e

    return wrapper


def _key_values(items: list[str] | None, option: str) -> dict[str, str]:
    values = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise typer.BadParameter(f"'{item}' debe tener la forma NOMBRE=VALOR.", param_hint=option)
        values[key] = value
    return values


def _principal(name: str, credentials: list[str] | None, receipts: list[str] | None) -> Principal:
    parsed = []
    for receipt_name, amount in _key_values(receipts, "--receipt").items():
        if not amount.isdigit():
            raise typer.BadParameter(
                f"El monto de {receipt_name} debe estar en centavos.", param_hint="--receipt"
            )
        parsed.append(Receipt(receipt_name, int(amount)))
    return Principal(name, frozenset(credentials or []), tuple(parsed))


def _show(value) -> None:
    if isinstance(value, DigitalObject):
        mostrar_objeto(value)
    elif isinstance(value, Session):
        mostrar_sesion(value)
    elif isinstance(value, list) and all(isinstance(v, DisseminatorDescriptor) for v in value):
        mostrar_diseminadores(value)
    elif value is not None:
        console.print_json(json.dumps(to_wire(value)))


def _emit(result, as_json: bool) -> None:
    """
    Prints a result; a PolicyViolation ends the command with exit 2.
    """

    if isinstance(result, PolicyViolation):
        if as_json:
            typer.echo(json.dumps({"ok": False, "error": violation_to_wire(result)}))
        else:
            err_console.print(Panel(result.message, title="PolicyViolation", style="bold red"))
        raise typer.Exit(EXIT_DENIED)
    if as_json:
        typer.echo(json.dumps({"ok": True, "result": to_wire(result)}))
    elif isinstance(result, DisseminationResult):
        typer.echo(result.payload, nl=False)
    else:
        _show(result)


def _done(value, as_json: bool, text: str) -> None:
    if as_json:
        _emit(value, as_json)
    else:
        typer.echo(text)


@app.callback(invoke_without_command=True)
def principal(ctx: typer.Context):
    """Sin subcomando abre la consola interactiva."""
    if ctx.invoked_subcommand is not None:
        return
    menu_principal()


@app.command()
@maneja_errores
def ingest(file: Path, root: RootOption = None, as_json: JsonOption = False):
    """Ingresa un objeto desde su JSON canónico."""
    obj = object_from_dict(json.loads(file.read_text(encoding="utf-8")))
    object_id = _services(root).repository.ingest(obj)
    _done(object_id, as_json, object_id)


@object_app.command("show")
@maneja_errores
def object_show(object_id: str, root: RootOption = None, as_json: JsonOption = False):
    """Muestra un objeto."""
    _emit(_services(root).repository.get_object(object_id), as_json)


@policy_app.command("set-default")
@maneja_errores
def policy_set_default(file: Path, root: RootOption = None, as_json: JsonOption = False):
    """Reemplaza la política por defecto del repositorio."""
    _services(root).repository.set_default_policy(file.read_text(encoding="utf-8"))
    _done("default", as_json, "Política por defecto actualizada.")


@group_app.command("add")
@maneja_errores
def policy_group_add(
    group_id: str, file: Path, root: RootOption = None, as_json: JsonOption = False
):
    """Registra o actualiza una política de grupo."""
    _services(root).repository.register_group_policy(
        group_id, file.read_text(encoding="utf-8")
    )
    _done(group_id, as_json, f"Grupo {group_id} registrado.")


@policy_app.command("attach")
@maneja_errores
def policy_attach(
    object_id: str,
    disseminator_id: str,
    inline: Annotated[
        Optional[str], typer.Option("--inline", help="DataStream con la política.")
    ] = None,
    group: Annotated[Optional[str], typer.Option("--group", help="ID de grupo.")] = None,
    root: RootOption = None,
    as_json: JsonOption = False,
):
    """Asocia una política a un diseminador."""
    if (inline is None) == (group is None):
        raise typer.BadParameter("Indica exactamente uno de --inline o --group.")
    binding = InlinePolicy(inline) if inline is not None else GroupPolicy(group)
    _services(root).repository.attach_policy(object_id, disseminator_id, binding)
    if as_json:
        _emit({"objectId": object_id, "disseminatorId": disseminator_id}, as_json)
    else:
        typer.echo(f"Política asociada a {object_id}/{disseminator_id}.")


@app.command()
@maneja_errores
def invoke(
    object_id: str,
    disseminator_id: str,
    method: str,
    arg: ArgOption = None,
    credential: CredentialOption = None,
    receipt: ReceiptOption = None,
    principal_name: PrincipalOption = "anonymous",
    session: SessionOption = "cli",
    root: RootOption = None,
    as_json: JsonOption = False,
):
    """Invoca un método de contenido a través de las políticas."""
    result = _services(root).repository.disseminate(
        object_id,
        disseminator_id,
        method,
        _key_values(arg, "--arg"),
        _principal(principal_name, credential, receipt),
        session,
    )
    _emit(result, as_json)


@app.command()
@maneja_errores
def primitive(
    object_id: str,
    method: str,
    arg: ArgOption = None,
    args_json: Annotated[
        Optional[str], typer.Option("--args-json", help="Argumentos como objeto JSON.")
    ] = None,
    credential: CredentialOption = None,
    receipt: ReceiptOption = None,
    principal_name: PrincipalOption = "anonymous",
    session: SessionOption = "cli",
    root: RootOption = None,
    as_json: JsonOption = False,
):
    """Invoca un método del diseminador primitivo."""
    args: dict = _key_values(arg, "--arg")
    if args_json is not None:
        extra = json.loads(args_json)
        if not isinstance(extra, dict):
            raise typer.BadParameter("Debe ser un objeto JSON.", param_hint="--args-json")
        args.update(extra)
    result = _services(root).repository.invoke_primitive(
        object_id, method, args, _principal(principal_name, credential, receipt), session
    )
    _emit(result, as_json)


@app.command("export")
@maneja_errores
def export_object(
    object_id: str,
    output: Annotated[Path, typer.Option("-o", "--output", help="Archivo .pcpe de salida.")],
    root: RootOption = None,
    as_json: JsonOption = False,
):
    """Exporta un objeto como paquete portable."""
    package = _services(root).portability.export_object(object_id)
    output.write_bytes(package.to_bytes())
    if as_json:
        _emit({"objectId": object_id, "digest": package.digest}, as_json)
    else:
        typer.echo(object_id)


@app.command("import")
@maneja_errores
def import_object(file: Path, root: RootOption = None, as_json: JsonOption = False):
    """Importa un paquete portable verificando su digest."""
    object_id = _services(root).portability.import_object(file.read_bytes())
    _done(object_id, as_json, object_id)


@session_app.command("show")
@maneja_errores
def session_show(session_id: str, root: RootOption = None, as_json: JsonOption = False):
    """Muestra los estados de autómata de una sesión."""
    _emit(_services(root).repository.show_session(session_id), as_json)


@registry_app.command("add-interface")
@maneja_errores
def registry_add_interface(file: Path, root: RootOption = None, as_json: JsonOption = False):
    """Registra una interfaz de comportamiento."""
    interface = interface_from_dict(json.loads(file.read_text(encoding="utf-8")))
    _services(root).repository.registry.register_interface(interface)
    _done(interface.id, as_json, interface.id)


@registry_app.command("add-mechanism")
@maneja_errores
def registry_add_mechanism(file: Path, root: RootOption = None, as_json: JsonOption = False):
    """Registra un mecanismo validándolo contra su interfaz."""
    mechanism = mechanism_from_dict(json.loads(file.read_text(encoding="utf-8")))
    _services(root).repository.registry.register_mechanism(mechanism)
    _done(mechanism.id, as_json, mechanism.id)


@app.command()
def serve(
    host: Annotated[Optional[str], typer.Option("--host")] = None,
    port: Annotated[Optional[int], typer.Option("--port")] = None,
    root: RootOption = None,
):
    """Levanta el servicio JSON (POST /rpc)."""
    import uvicorn

    from api.main import create_app

    settings = load_settings().with_root(root)
    configure_logging(settings.log_level)
    uvicorn.run(
        create_app(build_services(settings)),
        host=host or settings.host,
        port=port or settings.port,
    )


def mostrar_objeto(obj: DigitalObject) -> None:
    table = Table(title=f"{obj.id} - {obj.label}", title_style=f"bold {AZUL}", border_style=AZUL)
    table.add_column("DataStream", style="cyan")
    table.add_column("Tipo MIME", style="white")
    table.add_column("Contenido", style="white")
    for ds in obj.datastreams.values():
        content = ds.reference if ds.is_reference else f"{len(ds.inline)} bytes"
        table.add_row(ds.id, ds.mime_type, content)
    console.print(table)
    dissems = Table(title="Diseminadores", title_style=f"bold {AZUL}", border_style=AZUL)
    dissems.add_column("ID", style="cyan")
    dissems.add_column("Interfaz", style="white")
    dissems.add_column("Mecanismo", style="white")
    dissems.add_column("Política", style="white")
    for d in obj.disseminators:
        binding = obj.policy_bindings.get(d.id)
        if binding is None:
            policy = "-"
        elif isinstance(binding, InlinePolicy):
            policy = f"inline:{binding.ds_id}"
        else:
            policy = f"group:{binding.group_id}"
        dissems.add_row(d.id, d.interface_id, d.mechanism_id, policy)
    console.print(dissems)


def mostrar_diseminadores(descriptors: list[DisseminatorDescriptor]) -> None:
    table = Table(title="Diseminadores", title_style=f"bold {AZUL}", border_style=AZUL)
    table.add_column("ID", style="cyan")
    table.add_column("Interfaz", style="white")
    table.add_column("Métodos", style="white")
    for d in descriptors:
        methods = ", ".join(
            f"{m.name}({', '.join(f'{p.name}: {p.type}' for p in m.params)})"
            for m in d.methods
        )
        table.add_row(d.disseminator_id, d.interface_id, methods)
    console.print(table)


def mostrar_sesion(session: Session) -> None:
    table = Table(title=f"Sesión {session.id}", title_style=f"bold {AZUL}", border_style=AZUL)
    table.add_column("Objeto", style="cyan")
    table.add_column("Ámbito", style="white")
    table.add_column("Estado", style="white")
    table.add_column("Detenida", style="white")
    for (object_id, scope), record in sorted(session.scopes.items()):
        state = ", ".join(f"{k}={v['v']}" for k, v in record.state.items()) or "{}"
        table.add_row(object_id, scope, state, "✓" if record.killed else "x")
    console.print(table)


def menu_principal():
    """Bucle de la consola interactiva."""
    services = _services(None)
    while True:
        opcion = questionary.select(
            "Menú Principal",
            choices=[
                "Ver objetos",
                "Ver diseminadores de un objeto",
                "Invocar un método",
                "Ver una sesión",
                "Salir",
            ],
            style=custom_style,
        ).ask()
        if opcion is None or opcion == "Salir":
            console.print(Panel("¡Hasta luego!", style=f"bold {AZUL}"))
            break
        try:
            if opcion == "Ver objetos":
                ver_objetos(services)
            elif opcion == "Ver diseminadores de un objeto":
                ver_diseminadores(services)
            elif opcion == "Invocar un método":
                invocar_metodo(services)
            elif opcion == "Ver una sesión":
                sesion = questionary.text("ID de sesión:", style=custom_style).ask()
                if sesion:
                    mostrar_sesion(services.repository.show_session(sesion))
        except PCPEError as e:
            console.print(Panel(f"Error: {e}", style=f"bold {DORADO}"))


def ver_objetos(services: Services):
    objects = services.repository.list_objects()
    if not objects:
        console.print(Panel("El repositorio no tiene objetos.", style=f"bold {DORADO}"))
        return
    table = Table(title="Objetos", title_style=f"bold {AZUL}", border_style=AZUL)
    table.add_column("ID", style="cyan")
    table.add_column("Etiqueta", style="white")
    table.add_column("DataStreams", style="white")
    table.add_column("Diseminadores", style="white")
    for obj in objects:
        table.add_row(obj.id, obj.label, str(len(obj.datastreams)), str(len(obj.disseminators)))
    console.print(table)


def seleccionar_objeto(services: Services, mensaje="Selecciona un objeto:"):
    ids = services.repository.storage.list_object_ids()
    if not ids:
        console.print(Panel("El repositorio no tiene objetos.", style=f"bold {DORADO}"))
        return None
    elegido = questionary.select(mensaje, choices=ids, style=custom_style).ask()
    return services.repository.get_object(elegido) if elegido else None


def ver_diseminadores(services: Services):
    obj = seleccionar_objeto(services)
    if obj is None:
        return
    result = services.repository.invoke_primitive(
        obj.id, "ListDisseminators", {}, Principal(), "console"
    )
    if isinstance(result, PolicyViolation):
        console.print(Panel(result.message, style="bold red"))
        return
    mostrar_diseminadores(result)


def invocar_metodo(services: Services):
    obj = seleccionar_objeto(services)
    if obj is None or not obj.disseminators:
        return
    dissem_id = questionary.select(
        "Diseminador:", choices=[d.id for d in obj.disseminators], style=custom_style
    ).ask()
    if dissem_id is None:
        return
    interface = services.repository.registry.get_interface(
        obj.get_disseminator(dissem_id).interface_id
    )
    method = questionary.select(
        "Método:", choices=list(interface.method_names), style=custom_style
    ).ask()
    if method is None:
        return
    args = {}
    for param in interface.get_method(method).params:
        args[param.name] = questionary.text(
            f"{param.name} ({param.type}):", style=custom_style
        ).ask()
    credenciales = questionary.text(
        "Credenciales (separadas por coma, vacío para ninguna):", style=custom_style
    ).ask() or ""
    session_id = questionary.text("Sesión:", default="console", style=custom_style).ask()
    principal_ = Principal(
        "console", frozenset(c.strip() for c in credenciales.split(",") if c.strip())
    )
    result = services.repository.disseminate(
        obj.id, dissem_id, method, args, principal_, session_id or "console"
    )
    if isinstance(result, PolicyViolation):
        console.print(Panel(result.message, title="Denegado", style="bold red"))
        return
    if result.mime_type.startswith("text/"):
        cuerpo = result.payload.decode("utf-8", errors="replace")
    else:
        cuerpo = f"{len(result.payload)} bytes de {result.mime_type}"
    console.print(Panel(cuerpo, title=f"{method} ({result.mime_type})", style=f"bold {AZUL}"))


def run_command(argv: list[str] | None = None) -> int:
    """
    Runs the CLI and returns its exit code: 0 ok, 1 fault, 2 denial,
    64 usage error.
    """

    try:
        rv = app(args=argv, prog_name="pcpe", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        err_console.print("Abortado.")
        return EXIT_FAULT
    except click.ClickException as e:
        e.show()
        return EXIT_FAULT
    return rv if isinstance(rv, int) else EXIT_OK


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
